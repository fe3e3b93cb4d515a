#pragma once

// Building and loading video manifests from ASR segments, speaker labels and
// pre-extracted frame directories ("<ms_timestamp>.jpg" files).

#include <filesystem>
#include <string>
#include <vector>

#include "scenedialog/model.hpp"

namespace scenedialog {

struct AsrSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
};

struct FrameFile {
  std::string ref;
  double timestamp_s = 0.0;
};

// JSON list of {start, end, text}.
std::vector<AsrSegment> parse_asr(const json& j);
// JSON list of integer character ids.
std::vector<CharacterId> parse_speaker_labels(const json& j);

json read_json_file(const std::filesystem::path& path);  // IoError / SchemaError

// Image files whose stem is a millisecond timestamp, sorted by time.
std::vector<FrameFile> list_frames(const std::filesystem::path& frame_dir);

// One segment per ASR segment, roster from the distinct labels, frames
// assigned by timestamp into [start_s, end_s). Throws LengthMismatch,
// EmptyTranscript, NoFramesAvailable, or ValidationError.
VideoManifest build_manifest(const std::vector<AsrSegment>& asr,
                             const std::vector<CharacterId>& speaker_labels,
                             const std::vector<FrameFile>& frames, const std::string& video_id,
                             double duration_s);
VideoManifest build_manifest(const std::vector<AsrSegment>& asr,
                             const std::vector<CharacterId>& speaker_labels,
                             const std::filesystem::path& frame_dir, const std::string& video_id,
                             double duration_s);

// Throws ValidationError listing every violation.
void require_valid(const VideoManifest& manifest);

json manifest_document(const VideoManifest& manifest);
VideoManifest manifest_from_document(const json& doc);  // validates
VideoManifest load_manifest(const std::filesystem::path& path);

// Up to max_frames refs spread evenly over the segment's frames, in time
// order, always including the middle frame. Throws NoFramesAvailable.
std::vector<std::string> select_frames(const Segment& segment, int max_frames);
// The temporally middle frame of the segment.
std::string middle_frame(const Segment& segment);

}  // namespace scenedialog
