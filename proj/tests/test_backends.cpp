#include <gtest/gtest.h>

#include <cstdlib>

#include "scenedialog/backends.hpp"
#include "scenedialog/errors.hpp"
#include "scenedialog/http_backend.hpp"
#include "scenedialog/scripted.hpp"
#include "support.hpp"

using namespace scenedialog;

namespace {

ChatRequest simple(const std::string& purpose) {
  ChatRequest r;
  r.messages = {ChatMessage{MessageRole::User, "hi"}};
  r.purpose = purpose;
  return r;
}

}  // namespace

TEST(Retry, TransportErrorsBackOffExponentially) {
  ScriptedChatBackend b;
  b.push("p", ScriptItem::failure("transport"));
  b.push("p", ScriptItem::failure("transport"));
  b.push("p", "ok");
  BackendConfig c;
  c.max_retries = 2;
  c.retry_backoff_s = 0.5;
  std::vector<double> sleeps;
  CallLog log;
  EXPECT_EQ(chat(b, c, simple("p"), &log, [&](double s) { sleeps.push_back(s); }), "ok");
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0}));
  ASSERT_EQ(log.size(), 3u);
  auto e = log.entries();
  EXPECT_EQ(e[0]["attempt"], 1);
  EXPECT_TRUE(e[0].contains("error"));
  EXPECT_EQ(e[2]["response"], "ok");
  EXPECT_EQ(e[2]["seq"], 2);
}

TEST(Retry, GivesUpAfterMaxRetries) {
  ScriptedChatBackend b;
  for (int i = 0; i < 5; ++i) b.push("p", ScriptItem::failure("transport"));
  BackendConfig c;
  c.max_retries = 1;
  int sleeps = 0;
  EXPECT_THROW(chat(b, c, simple("p"), nullptr, [&](double) { ++sleeps; }), TransportError);
  EXPECT_EQ(sleeps, 1);
}

TEST(Retry, AuthAndMalformedAreNotRetried) {
  for (const char* kind : {"auth", "malformed"}) {
    ScriptedChatBackend b;
    b.push("p", ScriptItem::failure(kind));
    b.push("p", "never");
    int sleeps = 0;
    EXPECT_THROW(chat(b, BackendConfig{}, simple("p"), nullptr, [&](double) { ++sleeps; }), Error);
    EXPECT_EQ(sleeps, 0);
  }
}

TEST(Requests, Validated) {
  ScriptedChatBackend b;
  ChatRequest r = simple("p");
  r.temperature = -1;
  EXPECT_THROW(chat(b, BackendConfig{}, r), PreconditionError);
  r = simple("p");
  r.messages.clear();
  EXPECT_THROW(chat(b, BackendConfig{}, r), PreconditionError);
  ScriptedVisionBackend v;
  EXPECT_THROW(perceive(v, BackendConfig{}, VisionRequest{}), PreconditionError);
}

TEST(Scripted, ChatQueuesFallBackToStar) {
  ScriptedChatBackend b;
  b.push("*", "any");
  b.push("x", "specific");
  EXPECT_EQ(b.complete(simple("x")), "specific");
  EXPECT_EQ(b.complete(simple("x")), "any");
  EXPECT_THROW(b.complete(simple("x")), ScriptExhausted);
}

TEST(Scripted, VisionLookupOrder) {
  ScriptedVisionBackend v;
  v.set("behavior", "b.jpg", ScriptItem::reply("keyed"));
  v.set_default("emotion", ScriptItem::reply("calm"));
  VisionRequest r{{"a.jpg", "b.jpg"}, "p", "m", "behavior"};
  EXPECT_EQ(v.describe(r), "keyed");
  r.kind = "emotion";
  EXPECT_EQ(v.describe(r), "calm");
  r.kind = "scene";
  EXPECT_THROW(v.describe(r), FrameNotFound);
}

TEST(Scripted, IdenticalRequestsGiveIdenticalResponses) {
  auto run = [] {
    auto s = testsupport::fixture_script();
    std::vector<std::string> out;
    for (int i = 0; i < 4; ++i) out.push_back(s.chat->complete(simple("stage2.predict")));
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Embedding, HashedVectorsAreStableUnitVectors) {
  auto a = ScriptedEmbeddingBackend::hashed_unit_vector("cat", 16);
  EXPECT_EQ(a, ScriptedEmbeddingBackend::hashed_unit_vector("cat", 16));
  double n = 0;
  for (double x : a) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  EXPECT_NE(a, ScriptedEmbeddingBackend::hashed_unit_vector("dog", 16));
}

TEST(Embedding, ClientChecksShapes) {
  EmbeddingClient none;
  EXPECT_THROW(none(EmbeddingRequest{"a b", ""}), BackendUnavailable);
  EmbeddingClient c{std::make_shared<ScriptedEmbeddingBackend>(4), {}, nullptr};
  EXPECT_EQ(c(EmbeddingRequest{"two words", ""}).size(), 2u);
  EXPECT_THROW(c(EmbeddingRequest{"  ..  ", ""}), PreconditionError);
}

TEST(Templates, PlaceholdersAndSinglePassRendering) {
  auto t = make_template("t", "Hi {name}, see {thing} and {name}. {not a placeholder} {}");
  EXPECT_EQ(placeholders_in(t.body), (std::vector<std::string>{"name", "thing"}));
  EXPECT_EQ(render_prompt(t, {{"name", "{thing}"}, {"thing", "x"}}),
            "Hi {thing}, see x and {thing}. {not a placeholder} {}");
  try {
    render_prompt(t, {{"name", "a"}});
    FAIL();
  } catch (const MissingBinding& e) {
    EXPECT_STREQ(e.what(), "thing");
  }
}

TEST(Templates, ShippedDirectoryLoads) {
  auto store = testsupport::prompts();
  for (const char* id : {"stage1_scene", "stage1_plot_roles", "stage2_behavior", "stage2_emotion",
                         "stage2_predict", "stage3_critique", "reask", "baseline_text",
                         "baseline_image", "baseline_continue", "judge_TR", "judge_GQ", "judge_LC",
                         "judge_CD", "judge_VC", "judge_SC"})
    EXPECT_TRUE(store->contains(id)) << id;
  EXPECT_THROW(store->get("nope"), IoError);
}

TEST(Http, MissingKeyIsAuthErrorBeforeAnyRequest) {
  ::unsetenv("SCENEDIALOG_TEST_UNSET_KEY");
  BackendConfig c;
  c.endpoint_url = "https://example.invalid/v1/chat/completions";
  c.api_key_env_var = "SCENEDIALOG_TEST_UNSET_KEY";
  const long before = HttpChatBackend::requests_attempted();
  EXPECT_THROW(HttpChatBackend{c}, AuthError);
  EXPECT_EQ(HttpChatBackend::requests_attempted(), before);
}

TEST(Http, FrameDataUrlNeedsReadableFile) {
  EXPECT_THROW(frame_data_url("/nonexistent/frame.jpg"), FrameNotFound);
}
