#include <gtest/gtest.h>

#include "scenedialog/errors.hpp"
#include "scenedialog/ingest.hpp"
#include "support.hpp"

using namespace scenedialog;
using testsupport::fixture;

namespace {

std::vector<FrameFile> frames_every(double step, double until) {
  std::vector<FrameFile> f;
  for (double t = 0; t < until; t += step)
    f.push_back(FrameFile{std::to_string(static_cast<int>(t * 1000)) + ".jpg", t});
  return f;
}

Segment with_frames(int n) {
  Segment s;
  s.index = 1;
  s.end_s = 1;
  for (int i = 1; i <= n; ++i) s.frame_refs.push_back("f" + std::to_string(i));
  return s;
}

}  // namespace

TEST(Ingest, BuildsManifestFromFixtureFiles) {
  auto asr = parse_asr(read_json_file(fixture("ingest/asr.json")));
  auto labels = parse_speaker_labels(read_json_file(fixture("ingest/labels.json")));
  auto m = build_manifest(asr, labels, fixture("ingest/frames"), "dinner", 8.0);
  ASSERT_EQ(m.segments.size(), 3u);
  EXPECT_EQ(m.roster.size(), 2u);
  EXPECT_EQ(m.segments[1].speaker_id, 2);
  // frames at 0.5 s steps over [2.5, 5.0)
  EXPECT_EQ(m.segments[1].frame_refs.size(), 5u);
  EXPECT_NE(m.first_frame_ref.find("0.jpg"), std::string::npos);
  EXPECT_TRUE(validate_manifest(m).empty());
}

TEST(Ingest, Errors) {
  std::vector<AsrSegment> asr{{0, 1, "a"}, {1, 2, "b"}};
  auto frames = frames_every(0.5, 2.0);
  EXPECT_THROW(build_manifest({}, {}, frames, "v", 2.0), EmptyTranscript);
  EXPECT_THROW(build_manifest(asr, {1}, frames, "v", 2.0), LengthMismatch);
  EXPECT_THROW(build_manifest(asr, {1, 2}, std::vector<FrameFile>{}, "v", 2.0), NoFramesAvailable);
  std::vector<AsrSegment> inverted{{0, 1, "a"}, {1.5, 1.2, "b"}};
  EXPECT_THROW(build_manifest(inverted, {1, 2}, frames, "v", 2.0), Error);
  auto bad = parse_asr(read_json_file(fixture("ingest/asr_bad.json")));
  EXPECT_THROW(build_manifest(bad, {1, 2, 1}, fixture("ingest/frames"), "v", 8.0), Error);
  EXPECT_THROW(parse_asr(json{{"start", 1}}), SchemaError);
}

TEST(Ingest, ListFramesSortsByTimestamp) {
  auto f = list_frames(fixture("ingest/frames"));
  ASSERT_EQ(f.size(), 16u);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LT(f[i - 1].timestamp_s, f[i].timestamp_s);
  EXPECT_DOUBLE_EQ(f[3].timestamp_s, 1.5);
}

TEST(SelectFrames, NineFramesThreePicksSpanAndMiddle) {
  auto s = with_frames(9);
  EXPECT_EQ(select_frames(s, 3), (std::vector<std::string>{"f1", "f5", "f9"}));
  EXPECT_EQ(select_frames(s, 1), (std::vector<std::string>{"f5"}));
  EXPECT_EQ(middle_frame(s), "f5");
}

TEST(SelectFrames, PropertiesOverSizes) {
  for (int n = 1; n <= 20; ++n) {
    auto s = with_frames(n);
    const std::string middle = s.frame_refs[static_cast<std::size_t>((n - 1) / 2)];
    for (int m = 1; m <= 10; ++m) {
      auto picks = select_frames(s, m);
      EXPECT_EQ(picks.size(), static_cast<std::size_t>(std::min(n, m))) << n << "/" << m;
      EXPECT_NE(std::find(picks.begin(), picks.end(), middle), picks.end()) << n << "/" << m;
      // time order, no duplicates
      for (std::size_t i = 1; i < picks.size(); ++i) {
        auto a = std::find(s.frame_refs.begin(), s.frame_refs.end(), picks[i - 1]);
        auto b = std::find(s.frame_refs.begin(), s.frame_refs.end(), picks[i]);
        EXPECT_LT(a, b);
      }
    }
  }
  EXPECT_THROW(select_frames(with_frames(3), 0), PreconditionError);
  EXPECT_THROW(select_frames(with_frames(0), 2), NoFramesAvailable);
}

TEST(Manifest, LoadFixture) {
  auto m = testsupport::fixture_manifest();
  EXPECT_EQ(m.segments.size(), 4u);
  EXPECT_DOUBLE_EQ(m.speaking_rate_wps, 2.5);
  EXPECT_THROW(load_manifest(fixture("missing.json")), IoError);
}
