#include "scenedialog/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "scenedialog/errors.hpp"
#include "scenedialog/text.hpp"

namespace scenedialog {

Theme make_theme(std::string_view text) {
  std::string trimmed = trim(text);
  if (trimmed.empty()) throw ValidationError("theme must be nonempty");
  return Theme{std::move(trimmed)};
}

const Character* VideoManifest::find_character(CharacterId id) const {
  auto it = std::find_if(roster.begin(), roster.end(),
                         [id](const Character& c) { return c.id == id; });
  return it == roster.end() ? nullptr : &*it;
}

std::vector<int> AgentState::generated_rounds() const {
  std::vector<int> rounds;
  for (const auto& e : memory)
    if (e.kind == MemoryKind::Generated) rounds.push_back(e.round);
  return rounds;
}

const Role* Transcript::find_role(CharacterId id) const {
  auto it = std::find_if(roles.begin(), roles.end(),
                         [id](const Role& r) { return r.character_id == id; });
  return it == roles.end() ? nullptr : &*it;
}

std::string_view to_string(MetricId id) {
  switch (id) {
    case MetricId::TR: return "TR";
    case MetricId::GQ: return "GQ";
    case MetricId::LC: return "LC";
    case MetricId::CD: return "CD";
    case MetricId::VC: return "VC";
    case MetricId::SC: return "SC";
  }
  return "??";
}

MetricId metric_from_string(std::string_view name) {
  for (MetricId id : kAllMetrics)
    if (to_string(id) == name) return id;
  throw ParseError("unknown metric id '" + std::string(name) + "'");
}

std::optional<double> mean_of(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string format_fixed(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The epsilon absorbs binary representation error so that x.xx5 rounds up.
  const double rounded = std::floor(value * scale + 0.5 + 1e-9) / scale;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

// ---- validation ------------------------------------------------------------

std::vector<Violation> validate_manifest(const VideoManifest& m) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::optional<int> seg, std::string msg) {
    out.push_back(Violation{std::move(field), seg, std::move(msg)});
  };

  if (m.video_id.empty()) add("video_id", std::nullopt, "video_id is empty");
  if (!(m.duration_s > 0.0)) add("duration_s", std::nullopt, "duration must be positive");
  if (m.first_frame_ref.empty())
    add("first_frame_ref", std::nullopt, "first frame reference is required");
  if (!(m.speaking_rate_wps > 0.0))
    add("speaking_rate_wps", std::nullopt, "speaking rate must be positive");

  if (m.roster.empty()) add("roster", std::nullopt, "roster must contain at least one character");
  std::set<CharacterId> ids;
  for (const auto& c : m.roster) {
    if (!ids.insert(c.id).second)
      add("roster", std::nullopt, "duplicate character id " + std::to_string(c.id));
  }
  if (!ids.empty() && (*ids.begin() != 1 || *ids.rbegin() != static_cast<int>(ids.size())))
    add("roster", std::nullopt, "character ids must be contiguous from 1");

  if (m.segments.empty()) add("segments", std::nullopt, "manifest must contain at least one segment");
  const Segment* prev = nullptr;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Segment& s = m.segments[i];
    const int expected = static_cast<int>(i) + 1;
    const int tag = s.index;
    if (s.index != expected)
      add("index", tag, "segment index " + std::to_string(s.index) + " at position " +
                            std::to_string(expected));
    if (s.start_s < 0.0) add("start_s", tag, "start_s is negative");
    if (!(s.start_s < s.end_s)) add("start_s", tag, "start_s must be before end_s");
    if (s.end_s > m.duration_s) add("end_s", tag, "end_s exceeds manifest duration");
    if (ids.count(s.speaker_id) == 0)
      add("speaker_id", tag,
          "speaker " + std::to_string(s.speaker_id) + " is not in the roster");
    if (s.frame_refs.empty()) add("frame_refs", tag, "segment has no frames");
    if (prev && s.start_s < prev->end_s)
      add("start_s", tag, "segment overlaps segment " + std::to_string(prev->index));
    prev = &s;
  }
  return out;
}

ManifestStats manifest_stats(const VideoManifest& m) {
  return ManifestStats{static_cast<double>(m.roster.size()),
                       static_cast<double>(m.segments.size()), m.duration_s};
}

ManifestStats corpus_stats(std::span<const VideoManifest> manifests) {
  ManifestStats acc;
  if (manifests.empty()) return acc;
  for (const auto& m : manifests) {
    auto s = manifest_stats(m);
    acc.roles += s.roles;
    acc.turns += s.turns;
    acc.duration_s += s.duration_s;
  }
  const double n = static_cast<double>(manifests.size());
  return ManifestStats{acc.roles / n, acc.turns / n, acc.duration_s / n};
}

// ---- JSON ------------------------------------------------------------------

namespace {

std::string_view to_string(MemoryKind k) {
  return k == MemoryKind::Generated ? "generated" : "original";
}

MemoryKind memory_kind_from(const std::string& s) {
  if (s == "generated") return MemoryKind::Generated;
  if (s == "original") return MemoryKind::Original;
  throw json::other_error::create(501, "unknown memory kind '" + s + "'", nullptr);
}

std::string_view to_string(Verdict v) { return v == Verdict::Accept ? "accept" : "revise"; }

Verdict verdict_from(const std::string& s) {
  if (s == "accept") return Verdict::Accept;
  if (s == "revise") return Verdict::Revise;
  throw json::other_error::create(501, "unknown verdict '" + s + "'", nullptr);
}

}  // namespace

void to_json(json& j, const Theme& v) { j = v.text; }
void from_json(const json& j, Theme& v) { v.text = j.get<std::string>(); }

void to_json(json& j, const Character& v) {
  j = json{{"id", v.id}, {"label", v.label}};
  if (v.visual_descriptor) j["visual_descriptor"] = *v.visual_descriptor;
}
void from_json(const json& j, Character& v) {
  j.at("id").get_to(v.id);
  j.at("label").get_to(v.label);
  if (j.contains("visual_descriptor") && !j["visual_descriptor"].is_null())
    v.visual_descriptor = j["visual_descriptor"].get<std::string>();
  else
    v.visual_descriptor.reset();
}

void to_json(json& j, const Segment& v) {
  j = json{{"index", v.index},           {"start_s", v.start_s},
           {"end_s", v.end_s},           {"speaker_id", v.speaker_id},
           {"frame_refs", v.frame_refs}, {"original_utterance", v.original_utterance}};
}
void from_json(const json& j, Segment& v) {
  j.at("index").get_to(v.index);
  j.at("start_s").get_to(v.start_s);
  j.at("end_s").get_to(v.end_s);
  j.at("speaker_id").get_to(v.speaker_id);
  j.at("frame_refs").get_to(v.frame_refs);
  v.original_utterance = j.value("original_utterance", std::string{});
}

void to_json(json& j, const VideoManifest& v) {
  j = json{{"video_id", v.video_id},
           {"duration_s", v.duration_s},
           {"roster", v.roster},
           {"segments", v.segments},
           {"first_frame_ref", v.first_frame_ref},
           {"metadata", {{"speaking_rate_wps", v.speaking_rate_wps}}}};
}
void from_json(const json& j, VideoManifest& v) {
  j.at("video_id").get_to(v.video_id);
  j.at("duration_s").get_to(v.duration_s);
  j.at("roster").get_to(v.roster);
  j.at("segments").get_to(v.segments);
  v.first_frame_ref = j.value("first_frame_ref", std::string{});
  v.speaking_rate_wps = kDefaultSpeakingRateWps;
  if (j.contains("metadata"))
    v.speaking_rate_wps = j["metadata"].value("speaking_rate_wps", kDefaultSpeakingRateWps);
}

void to_json(json& j, const Plot& v) { j = json{{"summary", v.summary}, {"theme", v.theme}}; }
void from_json(const json& j, Plot& v) {
  j.at("summary").get_to(v.summary);
  j.at("theme").get_to(v.theme);
}

void to_json(json& j, const Role& v) {
  j = json{{"character_id", v.character_id}, {"name", v.name}, {"description", v.description}};
}
void from_json(const json& j, Role& v) {
  j.at("character_id").get_to(v.character_id);
  j.at("name").get_to(v.name);
  j.at("description").get_to(v.description);
}

void to_json(json& j, const MemoryEntry& v) {
  j = json{{"kind", to_string(v.kind)},
           {"round", v.round},
           {"speaker_id", v.speaker_id},
           {"sentence", v.sentence}};
}
void from_json(const json& j, MemoryEntry& v) {
  v.kind = memory_kind_from(j.at("kind").get<std::string>());
  j.at("round").get_to(v.round);
  j.at("speaker_id").get_to(v.speaker_id);
  j.at("sentence").get_to(v.sentence);
}

void to_json(json& j, const AgentState& v) {
  j = json{{"role", v.role}, {"memory", v.memory}, {"round", v.round}};
}
void from_json(const json& j, AgentState& v) {
  j.at("role").get_to(v.role);
  j.at("memory").get_to(v.memory);
  j.at("round").get_to(v.round);
}

void to_json(json& j, const Perception& v) {
  j = json{{"behavior", v.behavior},
           {"emotion", v.emotion},
           {"frame_refs_used", v.frame_refs_used},
           {"degraded", v.degraded}};
}
void from_json(const json& j, Perception& v) {
  j.at("behavior").get_to(v.behavior);
  j.at("emotion").get_to(v.emotion);
  v.frame_refs_used = j.value("frame_refs_used", std::vector<std::string>{});
  v.degraded = j.value("degraded", false);
}

void to_json(json& j, const CritiqueChecks& v) {
  j = json{{"theme_contextual", v.theme_contextual},
           {"pairwise_continuity", v.pairwise_continuity},
           {"global_coherence", v.global_coherence},
           {"length_fits", v.length_fits}};
}
void from_json(const json& j, CritiqueChecks& v) {
  j.at("theme_contextual").get_to(v.theme_contextual);
  j.at("pairwise_continuity").get_to(v.pairwise_continuity);
  j.at("global_coherence").get_to(v.global_coherence);
  j.at("length_fits").get_to(v.length_fits);
}

void to_json(json& j, const Suggestion& v) {
  j = json{{"verdict", to_string(v.verdict)}, {"text", v.text}, {"checks", v.checks}};
}
void from_json(const json& j, Suggestion& v) {
  v.verdict = verdict_from(j.at("verdict").get<std::string>());
  j.at("text").get_to(v.text);
  j.at("checks").get_to(v.checks);
}

void to_json(json& j, const Revision& v) {
  j = json{{"draft", v.draft}, {"suggestion", v.suggestion}};
}
void from_json(const json& j, Revision& v) {
  j.at("draft").get_to(v.draft);
  j.at("suggestion").get_to(v.suggestion);
}

void to_json(json& j, const DialogueTurn& v) {
  j = json{{"round", v.round},
           {"speaker_id", v.speaker_id},
           {"sentence", v.sentence},
           {"perception", v.perception},
           {"revisions", v.revisions},
           {"iterations_used", v.iterations_used},
           {"accepted", v.accepted}};
}
void from_json(const json& j, DialogueTurn& v) {
  j.at("round").get_to(v.round);
  j.at("speaker_id").get_to(v.speaker_id);
  j.at("sentence").get_to(v.sentence);
  j.at("perception").get_to(v.perception);
  j.at("revisions").get_to(v.revisions);
  j.at("iterations_used").get_to(v.iterations_used);
  v.accepted = j.value("accepted", true);
}

void to_json(json& j, const Transcript& v) {
  j = json{{"theme", v.theme},   {"plot", v.plot},
           {"roles", v.roles},   {"turns", v.turns},
           {"manifest_ref", v.manifest_ref}, {"method", v.method}};
}
void from_json(const json& j, Transcript& v) {
  j.at("theme").get_to(v.theme);
  j.at("plot").get_to(v.plot);
  j.at("roles").get_to(v.roles);
  j.at("turns").get_to(v.turns);
  j.at("manifest_ref").get_to(v.manifest_ref);
  v.method = j.value("method", std::string{"pipeline"});
}

void to_json(json& j, const MetricScore& v) {
  j = json{{"metric_id", to_string(v.metric)}, {"score", v.score}, {"comment", v.comment}};
}
void from_json(const json& j, MetricScore& v) {
  v.metric = metric_from_string(j.at("metric_id").get<std::string>());
  j.at("score").get_to(v.score);
  j.at("comment").get_to(v.comment);
}

void to_json(json& j, const EvalReport& v) {
  json per = json::object();
  for (const auto& [id, s] : v.per_metric) per[std::string(to_string(id))] = s;
  json failed = json::object();
  for (const auto& [id, reason] : v.failures) failed[std::string(to_string(id))] = reason;
  j = json{{"transcript_ref", v.transcript_ref},
           {"theme", v.theme},
           {"per_metric", per},
           {"failures", failed},
           {"excluded", v.failures.size()},
           {"average", v.average ? json(*v.average) : json(nullptr)}};
}
void from_json(const json& j, EvalReport& v) {
  j.at("transcript_ref").get_to(v.transcript_ref);
  j.at("theme").get_to(v.theme);
  v.per_metric.clear();
  for (const auto& [name, s] : j.at("per_metric").items())
    v.per_metric[metric_from_string(name)] = s.get<MetricScore>();
  v.failures.clear();
  if (j.contains("failures"))
    for (const auto& [name, reason] : j["failures"].items())
      v.failures[metric_from_string(name)] = reason.get<std::string>();
  if (j.contains("average") && !j["average"].is_null())
    v.average = j["average"].get<double>();
  else
    v.average.reset();
}

void to_json(json& j, const Violation& v) {
  j = json{{"field", v.field}, {"message", v.message}};
  j["segment_index"] = v.segment_index ? json(*v.segment_index) : json(nullptr);
}

void throw_schema_error(std::string_view kind, const std::string& detail) {
  throw SchemaError("malformed " + std::string(kind) + " document: " + detail);
}

json to_document(std::string_view kind, const json& data) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}, {"data", data}};
}

json from_document(const json& doc, std::string_view expected_kind) {
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw SchemaError("document has no schema_version");
  const json& version = doc["schema_version"];
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
    throw SchemaError("unsupported schema_version " + version.dump());
  if (doc.value("kind", std::string{}) != expected_kind)
    throw SchemaError("expected a '" + std::string(expected_kind) + "' document");
  if (!doc.contains("data")) throw SchemaError("document has no data");
  return doc["data"];
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace scenedialog
