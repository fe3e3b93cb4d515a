#pragma once

// Domain types shared by every module: manifests, agent state, turns,
// transcripts and evaluation scores, plus their canonical JSON encoding.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace scenedialog {

using json = nlohmann::json;

// Version written as "schema_version" at the top of every on-disk document.
inline constexpr int kSchemaVersion = 1;

using CharacterId = int;

struct Theme {
  std::string text;
  bool operator==(const Theme&) const = default;
};

// Trims the text and rejects blank themes with ValidationError.
Theme make_theme(std::string_view text);

struct Character {
  CharacterId id = 0;
  std::string label;
  std::optional<std::string> visual_descriptor;
  bool operator==(const Character&) const = default;
};

// One speaking period of the video. Index is 1-based.
struct Segment {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  CharacterId speaker_id = 0;
  std::vector<std::string> frame_refs;
  std::string original_utterance;

  double duration_s() const { return end_s - start_s; }
  bool operator==(const Segment&) const = default;
};

inline constexpr double kDefaultSpeakingRateWps = 2.5;

struct VideoManifest {
  std::string video_id;
  double duration_s = 0.0;
  std::vector<Character> roster;
  std::vector<Segment> segments;
  std::string first_frame_ref;
  double speaking_rate_wps = kDefaultSpeakingRateWps;

  const Character* find_character(CharacterId id) const;
  bool operator==(const VideoManifest&) const = default;
};

struct Plot {
  std::string summary;
  Theme theme;
  bool operator==(const Plot&) const = default;
};

struct Role {
  CharacterId character_id = 0;
  std::string name;
  std::string description;
  bool operator==(const Role&) const = default;
};

enum class MemoryKind { Generated, Original };

struct MemoryEntry {
  MemoryKind kind = MemoryKind::Original;
  int round = 0;  // 0 for original entries
  CharacterId speaker_id = 0;
  std::string sentence;
  bool operator==(const MemoryEntry&) const = default;
};

// A sub-agent's state: its role plus everything it remembers of the dialogue.
struct AgentState {
  Role role;
  std::vector<MemoryEntry> memory;
  int round = 0;

  // Rounds of the generated entries, in memory order.
  std::vector<int> generated_rounds() const;
  bool operator==(const AgentState&) const = default;
};

struct Perception {
  std::string behavior;
  std::string emotion;
  std::vector<std::string> frame_refs_used;
  bool degraded = false;
  bool operator==(const Perception&) const = default;
};

enum class Verdict { Accept, Revise };

struct CritiqueChecks {
  bool theme_contextual = true;
  bool pairwise_continuity = true;
  bool global_coherence = true;
  bool length_fits = true;

  bool all_pass() const {
    return theme_contextual && pairwise_continuity && global_coherence && length_fits;
  }
  bool operator==(const CritiqueChecks&) const = default;
};

struct Suggestion {
  Verdict verdict = Verdict::Accept;
  std::string text;  // empty iff accepted
  CritiqueChecks checks;
  bool operator==(const Suggestion&) const = default;
};

struct Revision {
  std::string draft;
  Suggestion suggestion;
  bool operator==(const Revision&) const = default;
};

struct DialogueTurn {
  int round = 0;
  CharacterId speaker_id = 0;
  std::string sentence;
  Perception perception;
  std::vector<Revision> revisions;  // rejected drafts, oldest first
  int iterations_used = 1;
  bool accepted = true;
  bool operator==(const DialogueTurn&) const = default;
};

struct Transcript {
  Theme theme;
  Plot plot;
  std::vector<Role> roles;
  std::vector<DialogueTurn> turns;
  std::string manifest_ref;
  std::string method = "pipeline";

  const Role* find_role(CharacterId id) const;
  bool operator==(const Transcript&) const = default;
};

enum class MetricId { TR, GQ, LC, CD, VC, SC };

inline constexpr std::array<MetricId, 6> kAllMetrics = {
    MetricId::TR, MetricId::GQ, MetricId::LC, MetricId::CD, MetricId::VC, MetricId::SC};

std::string_view to_string(MetricId id);
MetricId metric_from_string(std::string_view name);  // throws ParseError

struct MetricScore {
  MetricId metric = MetricId::TR;
  int score = 1;
  std::string comment;
  bool operator==(const MetricScore&) const = default;
};

struct EvalReport {
  std::string transcript_ref;
  Theme theme;
  std::map<MetricId, MetricScore> per_metric;
  std::map<MetricId, std::string> failures;  // metric -> reason; never imputed
  std::optional<double> average;             // only when all six succeeded

  bool operator==(const EvalReport&) const = default;
};

// Arithmetic mean; nullopt on empty input.
std::optional<double> mean_of(std::span<const double> values);

// Half-up rounding to `decimals` places for display ("3.275" -> "3.28").
std::string format_fixed(double value, int decimals = 2);

// ---- manifest checks -------------------------------------------------------

struct Violation {
  std::string field;
  std::optional<int> segment_index;
  std::string message;
  bool operator==(const Violation&) const = default;
};

// Empty iff every manifest invariant holds.
std::vector<Violation> validate_manifest(const VideoManifest& manifest);

struct ManifestStats {
  double roles = 0;
  double turns = 0;
  double duration_s = 0;
  bool operator==(const ManifestStats&) const = default;
};

ManifestStats manifest_stats(const VideoManifest& manifest);
// Per-field means across a corpus; zeros for an empty corpus.
ManifestStats corpus_stats(std::span<const VideoManifest> manifests);

// ---- JSON ------------------------------------------------------------------

void to_json(json& j, const Theme& v);
void from_json(const json& j, Theme& v);
void to_json(json& j, const Character& v);
void from_json(const json& j, Character& v);
void to_json(json& j, const Segment& v);
void from_json(const json& j, Segment& v);
void to_json(json& j, const VideoManifest& v);
void from_json(const json& j, VideoManifest& v);
void to_json(json& j, const Plot& v);
void from_json(const json& j, Plot& v);
void to_json(json& j, const Role& v);
void from_json(const json& j, Role& v);
void to_json(json& j, const MemoryEntry& v);
void from_json(const json& j, MemoryEntry& v);
void to_json(json& j, const AgentState& v);
void from_json(const json& j, AgentState& v);
void to_json(json& j, const Perception& v);
void from_json(const json& j, Perception& v);
void to_json(json& j, const CritiqueChecks& v);
void from_json(const json& j, CritiqueChecks& v);
void to_json(json& j, const Suggestion& v);
void from_json(const json& j, Suggestion& v);
void to_json(json& j, const Revision& v);
void from_json(const json& j, Revision& v);
void to_json(json& j, const DialogueTurn& v);
void from_json(const json& j, DialogueTurn& v);
void to_json(json& j, const Transcript& v);
void from_json(const json& j, Transcript& v);
void to_json(json& j, const MetricScore& v);
void from_json(const json& j, MetricScore& v);
void to_json(json& j, const EvalReport& v);
void from_json(const json& j, EvalReport& v);
void to_json(json& j, const Violation& v);

[[noreturn]] void throw_schema_error(std::string_view kind, const std::string& detail);

// Top-level documents carry {"schema_version", "kind", "data"}.
json to_document(std::string_view kind, const json& data);
// Checks version and kind; throws SchemaError.
json from_document(const json& doc, std::string_view expected_kind);

// Decodes a typed document, mapping JSON shape errors to SchemaError.
template <typename T>
T decode_document(const json& doc, std::string_view expected_kind);

// Deterministic text rendering used for every file the engine writes.
std::string dump(const json& j);

template <typename T>
T decode_document(const json& doc, std::string_view expected_kind) {
  const json& data = from_document(doc, expected_kind);
  try {
    return data.get<T>();
  } catch (const json::exception& e) {
    throw_schema_error(expected_kind, e.what());
  }
}

}  // namespace scenedialog
