#include <gtest/gtest.h>

#include <algorithm>
#include <functional>

#include "scenedialog/errors.hpp"
#include "scenedialog/ingest.hpp"
#include "scenedialog/model.hpp"
#include "support.hpp"

using namespace scenedialog;
using testsupport::random_manifest;

TEST(Theme, TrimsAndRejectsBlank) {
  EXPECT_EQ(make_theme("  a rainy day \n").text, "a rainy day");
  EXPECT_THROW(make_theme(" \t "), ValidationError);
}

TEST(Display, HalfUpAtTwoDecimals) {
  EXPECT_EQ(format_fixed(3.275), "3.28");
  EXPECT_EQ(format_fixed(3.75), "3.75");
  EXPECT_EQ(format_fixed(5.0), "5.00");
  EXPECT_EQ(format_fixed(0.125, 2), "0.13");
  EXPECT_EQ(format_fixed(2.5, 0), "3");
}

TEST(Mean, EmptyIsNullopt) {
  EXPECT_FALSE(mean_of({}).has_value());
  std::vector<double> v{1, 2, 3, 6};
  EXPECT_DOUBLE_EQ(*mean_of(v), 3.0);
}

TEST(Metric, IdsRoundTrip) {
  for (MetricId m : kAllMetrics) EXPECT_EQ(metric_from_string(to_string(m)), m);
  EXPECT_THROW(metric_from_string("XX"), ParseError);
}

TEST(Manifest, RandomValidManifestsRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    auto m = random_manifest(rng);
    ASSERT_TRUE(validate_manifest(m).empty()) << dump(json(m));
    auto text = dump(manifest_document(m));
    auto back = manifest_from_document(json::parse(text));
    EXPECT_EQ(back, m);
    EXPECT_EQ(dump(manifest_document(back)), text);
  }
}

namespace {

struct Seeded {
  const char* name;
  std::function<void(VideoManifest&)> corrupt;
  const char* field;
};

}  // namespace

TEST(Manifest, SeededViolationsAreNamed) {
  const std::vector<Seeded> cases{
      {"empty id", [](VideoManifest& m) { m.video_id.clear(); }, "video_id"},
      {"zero duration", [](VideoManifest& m) { m.duration_s = 0; }, "duration_s"},
      {"no first frame", [](VideoManifest& m) { m.first_frame_ref.clear(); }, "first_frame_ref"},
      {"empty roster", [](VideoManifest& m) { m.roster.clear(); }, "roster"},
      {"no segments", [](VideoManifest& m) { m.segments.clear(); }, "segments"},
      {"bad index", [](VideoManifest& m) { m.segments[0].index = 9; }, "index"},
      {"start after end",
       [](VideoManifest& m) { std::swap(m.segments[0].start_s, m.segments[0].end_s); }, "start_s"},
      {"end past duration", [](VideoManifest& m) { m.segments.back().end_s = m.duration_s + 1; },
       "end_s"},
      {"unknown speaker", [](VideoManifest& m) { m.segments[0].speaker_id = 42; }, "speaker_id"},
      {"no frames", [](VideoManifest& m) { m.segments[0].frame_refs.clear(); }, "frame_refs"},
      {"overlap", [](VideoManifest& m) { m.segments[1].start_s = m.segments[0].end_s - 0.5; },
       "start_s"},
  };
  for (const auto& c : cases) {
    auto m = testsupport::fixture_manifest();
    c.corrupt(m);
    auto v = validate_manifest(m);
    ASSERT_FALSE(v.empty()) << c.name;
    EXPECT_TRUE(std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.field == c.field; }))
        << c.name;
    EXPECT_THROW(require_valid(m), ValidationError) << c.name;
  }
}

TEST(Manifest, Stats) {
  auto m = testsupport::fixture_manifest();
  EXPECT_EQ(manifest_stats(m), (ManifestStats{2, 4, 16}));
  std::vector<VideoManifest> two{m, m};
  two[1].segments.pop_back();
  EXPECT_DOUBLE_EQ(corpus_stats(two).turns, 3.5);
  EXPECT_EQ(corpus_stats({}), ManifestStats{});
}

TEST(Documents, VersionAndKindAreChecked) {
  auto doc = to_document("transcript", json::object());
  EXPECT_NO_THROW(from_document(doc, "transcript"));
  EXPECT_THROW(from_document(doc, "manifest"), SchemaError);
  doc["schema_version"] = 2;
  EXPECT_THROW(from_document(doc, "transcript"), SchemaError);
  EXPECT_THROW(decode_document<VideoManifest>(to_document("manifest", json{{"x", 1}}), "manifest"),
               SchemaError);
}

TEST(Transcript, RoundTripKeepsRevisions) {
  Transcript t;
  t.theme = make_theme("moving house");
  t.plot = Plot{"They pack boxes.", t.theme};
  t.roles = {Role{1, "Ana", "eldest"}, Role{2, "Tom", "brother"}};
  DialogueTurn turn;
  turn.round = 1;
  turn.speaker_id = 1;
  turn.sentence = "Careful with that lamp.";
  turn.perception = Perception{"lifts a box", "tired", {"a.jpg"}, false};
  Suggestion s;
  s.verdict = Verdict::Revise;
  s.text = "Mention the move.";
  s.checks.theme_contextual = false;
  turn.revisions = {Revision{"Hello.", s}};
  turn.iterations_used = 2;
  t.turns = {turn};
  t.manifest_ref = "v1";
  auto back = decode_document<Transcript>(json::parse(dump(to_document("transcript", t))), "transcript");
  EXPECT_EQ(back, t);
}

TEST(EvalReport, JsonCountsExclusions) {
  EvalReport r;
  r.transcript_ref = "v1";
  r.theme = make_theme("x");
  r.per_metric[MetricId::TR] = MetricScore{MetricId::TR, 4, "fine"};
  r.failures[MetricId::CD] = "ParseError: nope";
  json j = r;
  EXPECT_EQ(j["excluded"], 1);
  EXPECT_EQ(j.get<EvalReport>(), r);
}

TEST(AgentState, GeneratedRounds) {
  AgentState a;
  a.memory = {MemoryEntry{MemoryKind::Original, 0, 1, "x"},
              MemoryEntry{MemoryKind::Generated, 1, 1, "y"},
              MemoryEntry{MemoryKind::Generated, 2, 2, "z"}};
  EXPECT_EQ(a.generated_rounds(), (std::vector<int>{1, 2}));
}
