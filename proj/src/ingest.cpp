#include "scenedialog/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "scenedialog/errors.hpp"

namespace scenedialog {

std::vector<AsrSegment> parse_asr(const json& j) {
  if (!j.is_array()) throw SchemaError("ASR input must be a JSON list");
  std::vector<AsrSegment> out;
  try {
    for (const auto& item : j)
      out.push_back(AsrSegment{item.at("start").get<double>(), item.at("end").get<double>(),
                               item.value("text", std::string{})});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed ASR segment: ") + e.what());
  }
  return out;
}

std::vector<CharacterId> parse_speaker_labels(const json& j) {
  if (!j.is_array()) throw SchemaError("speaker labels must be a JSON list");
  std::vector<CharacterId> out;
  for (const auto& item : j) {
    if (!item.is_number_integer()) throw SchemaError("speaker label is not an integer");
    out.push_back(item.get<CharacterId>());
  }
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string() + " is not valid JSON");
  return j;
}

std::vector<FrameFile> list_frames(const std::filesystem::path& frame_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(frame_dir, ec)) throw IoError("frame directory not found: " + frame_dir.string());
  static const std::set<std::string> kImageExt = {".jpg", ".jpeg", ".png", ".webp"};
  std::vector<FrameFile> frames;
  for (const auto& entry : fs::directory_iterator(frame_dir)) {
    if (!entry.is_regular_file() || !kImageExt.count(entry.path().extension().string())) continue;
    const std::string stem = entry.path().stem().string();
    long long ms = 0;
    auto [ptr, err] = std::from_chars(stem.data(), stem.data() + stem.size(), ms);
    if (err != std::errc{} || ptr != stem.data() + stem.size()) continue;
    frames.push_back(FrameFile{entry.path().string(), static_cast<double>(ms) / 1000.0});
  }
  std::sort(frames.begin(), frames.end(), [](const FrameFile& a, const FrameFile& b) {
    return a.timestamp_s != b.timestamp_s ? a.timestamp_s < b.timestamp_s : a.ref < b.ref;
  });
  return frames;
}

void require_valid(const VideoManifest& manifest) {
  auto violations = validate_manifest(manifest);
  if (violations.empty()) return;
  std::string msg = "manifest '" + manifest.video_id + "' is invalid:";
  for (const auto& v : violations) {
    msg += "\n  ";
    if (v.segment_index) msg += "segment " + std::to_string(*v.segment_index) + ": ";
    msg += v.field + ": " + v.message;
  }
  throw ValidationError(msg);
}

VideoManifest build_manifest(const std::vector<AsrSegment>& asr,
                             const std::vector<CharacterId>& speaker_labels,
                             const std::vector<FrameFile>& frames, const std::string& video_id,
                             double duration_s) {
  if (asr.empty()) throw EmptyTranscript("ASR transcript has no segments");
  if (asr.size() != speaker_labels.size())
    throw LengthMismatch(std::to_string(asr.size()) + " ASR segments but " +
                         std::to_string(speaker_labels.size()) + " speaker labels");
  if (frames.empty()) throw NoFramesAvailable("frame directory for '" + video_id + "' is empty");

  VideoManifest m;
  m.video_id = video_id;
  m.duration_s = duration_s;
  m.first_frame_ref = frames.front().ref;

  std::set<CharacterId> distinct(speaker_labels.begin(), speaker_labels.end());
  for (CharacterId id : distinct)
    m.roster.push_back(Character{id, "Speaker " + std::to_string(id), std::nullopt});

  for (std::size_t i = 0; i < asr.size(); ++i) {
    Segment s;
    s.index = static_cast<int>(i) + 1;
    s.start_s = asr[i].start_s;
    s.end_s = asr[i].end_s;
    s.speaker_id = speaker_labels[i];
    s.original_utterance = asr[i].text;
    if (!(s.start_s < s.end_s))
      throw ValidationError("segment " + std::to_string(s.index) + ": start_s " +
                            std::to_string(s.start_s) + " is not before end_s " +
                            std::to_string(s.end_s));
    for (const auto& f : frames)
      if (f.timestamp_s >= s.start_s && f.timestamp_s < s.end_s) s.frame_refs.push_back(f.ref);
    if (s.frame_refs.empty())
      throw NoFramesAvailable("segment " + std::to_string(s.index) + " [" +
                              std::to_string(s.start_s) + ", " + std::to_string(s.end_s) +
                              ") has no frames");
    m.segments.push_back(std::move(s));
  }
  require_valid(m);
  return m;
}

VideoManifest build_manifest(const std::vector<AsrSegment>& asr,
                             const std::vector<CharacterId>& speaker_labels,
                             const std::filesystem::path& frame_dir, const std::string& video_id,
                             double duration_s) {
  if (asr.empty()) throw EmptyTranscript("ASR transcript has no segments");
  if (asr.size() != speaker_labels.size())
    throw LengthMismatch(std::to_string(asr.size()) + " ASR segments but " +
                         std::to_string(speaker_labels.size()) + " speaker labels");
  return build_manifest(asr, speaker_labels, list_frames(frame_dir), video_id, duration_s);
}

json manifest_document(const VideoManifest& manifest) { return to_document("manifest", manifest); }

VideoManifest manifest_from_document(const json& doc) {
  auto m = decode_document<VideoManifest>(doc, "manifest");
  require_valid(m);
  return m;
}

VideoManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_document(read_json_file(path));
}

std::vector<std::string> select_frames(const Segment& segment, int max_frames) {
  if (max_frames < 1) throw PreconditionError("max_frames must be >= 1");
  const auto& refs = segment.frame_refs;
  const std::size_t n = refs.size();
  if (n == 0) throw NoFramesAvailable("segment " + std::to_string(segment.index) + " has no frames");
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(max_frames), n);
  const std::size_t middle = (n - 1) / 2;
  if (m == 1) return {refs[middle]};

  // Evenly spaced positions over [0, n-1]; distinct because the step is >= 1.
  std::vector<std::size_t> picks(m);
  for (std::size_t k = 0; k < m; ++k)
    picks[k] = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(m - 1)));

  if (!std::binary_search(picks.begin(), picks.end(), middle)) {
    // Swap the interior pick nearest to the middle for the middle itself;
    // the endpoints stay so the span of the segment is still covered.
    std::size_t best = 1;
    for (std::size_t k = 1; k + 1 < m; ++k) {
      auto dist = [&](std::size_t i) { return picks[i] > middle ? picks[i] - middle : middle - picks[i]; };
      if (dist(k) < dist(best)) best = k;
    }
    if (m == 2) {
      picks[picks[1] - middle < middle - picks[0] ? 1 : 0] = middle;
    } else {
      picks[best] = middle;
    }
    std::sort(picks.begin(), picks.end());
  }

  std::vector<std::string> out;
  out.reserve(m);
  for (auto i : picks) out.push_back(refs[i]);
  return out;
}

std::string middle_frame(const Segment& segment) { return select_frames(segment, 1).front(); }

}  // namespace scenedialog
