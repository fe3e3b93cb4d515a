#include <gtest/gtest.h>

#include <chrono>
#include <numeric>

#include "scenedialog/errors.hpp"
#include "scenedialog/pipeline.hpp"
#include "scenedialog/text.hpp"
#include "support.hpp"

using namespace scenedialog;
using namespace testsupport;

namespace {

ScriptedBackends bare() {
  ScriptedBackends s;
  s.chat = std::make_shared<ScriptedChatBackend>();
  s.vision = std::make_shared<ScriptedVisionBackend>();
  s.vision->set_default("scene", ScriptItem::reply("an office"));
  s.vision->set_default("behavior", ScriptItem::reply("waves"));
  s.vision->set_default("emotion", ScriptItem::reply("happy"));
  return s;
}

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string("word");
  return s;
}

Theme party() { return make_theme("a surprise birthday party"); }

}  // namespace

TEST(Pipeline, FixtureRunIsDeterministic) {
  auto run = [] {
    auto s = fixture_script();
    auto log = std::make_shared<CallLog>();
    auto t = run_dialogue(fixture_manifest(), party(), scripted_context(s, log));
    return std::make_pair(dump(to_document("transcript", t)), log->to_jsonl());
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  auto t = decode_document<Transcript>(json::parse(a.first), "transcript");
  ASSERT_EQ(t.turns.size(), 4u);
  EXPECT_EQ(t.turns[0].sentence, "Did you order the cake for Friday's surprise?");
  EXPECT_EQ(t.roles[1].name, "Ben");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(t.turns[i].round, static_cast<int>(i) + 1);
    EXPECT_EQ(t.turns[i].speaker_id, static_cast<int>(i % 2) + 1);
    EXPECT_TRUE(t.turns[i].accepted);
    EXPECT_EQ(t.turns[i].iterations_used, 1);
    EXPECT_EQ(t.turns[i].perception.behavior, "leans toward the other person and speaks quietly");
  }
}

TEST(Pipeline, MemoryInvariantEveryRound) {
  auto s = fixture_script();
  auto ctx = scripted_context(s, std::make_shared<CallLog>());
  int seen = 0;
  ctx.on_round = [&](int round, const std::vector<AgentState>& states) {
    ++seen;
    EXPECT_EQ(round, seen);
    std::vector<int> expected(static_cast<std::size_t>(round));
    std::iota(expected.begin(), expected.end(), 1);
    for (const auto& a : states) {
      EXPECT_EQ(a.round, round);
      EXPECT_EQ(a.generated_rounds(), expected);
    }
  };
  run_dialogue(fixture_manifest(), party(), ctx);
  EXPECT_EQ(seen, 4);
}

TEST(Pipeline, IterationBoundWhenNeverAccepted) {
  for (int n = 1; n <= 3; ++n) {
    auto s = bare();
    s.chat->push("stage1.plot_roles", plot_roles_json());
    for (int i = 0; i < 4 * n; ++i) {
      s.chat->push("stage2.predict", answer("draft " + std::to_string(i)));
      s.chat->push("stage3.critique", reject_json("try again"));
    }
    PipelineConfig c;
    c.max_iterations = n;
    auto t = run_dialogue(fixture_manifest(), party(), scripted_context(s, nullptr, c));
    ASSERT_EQ(t.turns.size(), 4u);
    for (const auto& turn : t.turns) {
      EXPECT_EQ(turn.iterations_used, n);
      EXPECT_FALSE(turn.accepted);
      EXPECT_EQ(turn.revisions.size(), static_cast<std::size_t>(n));
      EXPECT_EQ(turn.sentence, turn.revisions.back().draft);
    }
  }
}

TEST(Pipeline, RejectThenAcceptRegeneratesWithSuggestion) {
  auto s = bare();
  s.chat->push("stage1.plot_roles", plot_roles_json());
  s.chat->push("stage2.predict", answer("Nice weather today."));
  s.chat->push("stage3.critique", reject_json("Bring up the hidden cake."));
  s.chat->push("stage2.predict", answer("Is the cake still hidden?"));
  for (int i = 0; i < 4; ++i) s.chat->push("stage3.critique", accept_json());
  for (int i = 0; i < 3; ++i) s.chat->push("stage2.predict", answer("Sure."));
  auto log = std::make_shared<CallLog>();
  auto t = run_dialogue(fixture_manifest(), party(), scripted_context(s, log));
  const auto& first = t.turns[0];
  ASSERT_EQ(first.revisions.size(), 1u);
  EXPECT_EQ(first.revisions[0].draft, "Nice weather today.");
  EXPECT_EQ(first.revisions[0].suggestion.text, "Bring up the hidden cake.");
  EXPECT_EQ(first.sentence, "Is the cake still hidden?");
  EXPECT_EQ(first.iterations_used, 2);
  auto predicts = calls_for(*log, "stage2.predict");
  ASSERT_GE(predicts.size(), 2u);
  const std::string second_prompt = predicts[1]["request"]["messages"][0]["content"];
  EXPECT_NE(second_prompt.find("Bring up the hidden cake."), std::string::npos);
  const std::string first_prompt = predicts[0]["request"]["messages"][0]["content"];
  EXPECT_EQ(first_prompt.find("Bring up the hidden cake."), std::string::npos);
}

TEST(Critique, LengthCheckUsesSpeakingWindow) {
  auto s = bare();
  s.chat->push("stage3.critique", accept_json());
  s.chat->push("stage3.critique", accept_json());
  auto ctx = scripted_context(s, nullptr);
  auto seg = fixture_manifest().segments[0];
  ASSERT_DOUBLE_EQ(seg.duration_s(), 4.0);
  Plot plot{"p", party()};
  auto long_one = critique_turn(party(), plot, words(40), std::nullopt, {}, seg, "Mia", ctx);
  EXPECT_EQ(long_one.verdict, Verdict::Revise);
  EXPECT_FALSE(long_one.checks.length_fits);
  EXPECT_NE(long_one.text.find("10"), std::string::npos);
  auto short_one = critique_turn(party(), plot, words(9), std::nullopt, {}, seg, "Mia", ctx);
  EXPECT_EQ(short_one.verdict, Verdict::Accept);
  EXPECT_TRUE(short_one.checks.length_fits);
  EXPECT_TRUE(short_one.text.empty());
}

TEST(Critique, SynthesizesSuggestionWhenModelGivesNone) {
  auto s = bare();
  s.chat->push("stage3.critique", reject_json(""));
  auto ctx = scripted_context(s, nullptr);
  auto r = critique_turn(party(), Plot{"p", party()}, "hi", std::nullopt, {},
                         fixture_manifest().segments[0], "Mia", ctx);
  EXPECT_EQ(r.verdict, Verdict::Revise);
  EXPECT_FALSE(r.text.empty());
}

TEST(WordBudget, CeilWithFloor) {
  EXPECT_EQ(word_budget(2.5, 4.0), 10);
  EXPECT_EQ(word_budget(2.5, 4.01), 11);
  EXPECT_EQ(word_budget(2.5, 0.4), 3);
  EXPECT_EQ(word_budget(3.0, 1.0), 3);
  EXPECT_EQ(word_budget(3.0, 1.5), 5);
}

TEST(Memory, BudgetDropsOriginalsFirstAndProtectsRecentRounds) {
  std::vector<MemoryEntry> mem{{MemoryKind::Original, 0, 1, "a b c"},
                               {MemoryKind::Original, 0, 2, "d e"},
                               {MemoryKind::Generated, 1, 1, "f g"},
                               {MemoryKind::Generated, 2, 2, "h i"},
                               {MemoryKind::Generated, 3, 1, "j k"}};
  EXPECT_EQ(budget_memory(mem, 100, 3).size(), 5u);
  auto kept = budget_memory(mem, 7, 3);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].sentence, "f g");
  // rounds 2 and 3 survive even when over budget
  kept = budget_memory(mem, 1, 3);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].round, 2);
  EXPECT_EQ(kept[1].round, 3);
}

TEST(Answer, TakesTextAfterLastMarker) {
  EXPECT_EQ(extract_answer("PLAN: think. ANSWER: first\nAnswer: \"second line\""), "second line");
  EXPECT_EQ(extract_answer("no marker"), "");
  EXPECT_EQ(extract_answer("answer:\n  wrapped\nline"), "wrapped line");
}

TEST(Predict, ReasksOnceThenEmptyGeneration) {
  auto s = bare();
  s.chat->push("stage2.predict", "I forgot the format");
  s.chat->push("stage2.predict", answer("Fixed."));
  auto ctx = scripted_context(s, nullptr);
  AgentState a{Role{1, "Mia", "d"}, {}, 0};
  Perception p{"waves", "happy", {"f"}, false};
  std::vector<Role> roles{a.role};
  EXPECT_EQ(predict_turn(a, p, std::nullopt, std::nullopt, party(), Plot{"p", party()}, roles, ctx),
            "Fixed.");
  s.chat->push("stage2.predict", "nope");
  s.chat->push("stage2.predict", "still nope");
  EXPECT_THROW(predict_turn(a, p, std::nullopt, std::nullopt, party(), Plot{"p", party()}, roles, ctx),
               EmptyGeneration);
}

TEST(StageOne, RoleParsing) {
  auto roster = fixture_manifest().roster;
  auto [plot, roles] = parse_plot_and_roles("Here: " + plot_roles_json(), party(), roster);
  EXPECT_EQ(plot.theme, party());
  ASSERT_EQ(roles.size(), 2u);
  EXPECT_EQ(roles[0].name, "Mia");
  EXPECT_THROW(parse_plot_and_roles("{\"plot\": \"x\", \"roles\": []}", party(), roster), ParseError);
  EXPECT_THROW(parse_plot_and_roles(
                   R"({"plot": "x", "roles": [{"character_id": 1, "name": "A"}, {"character_id": 1, "name": "B"}]})",
                   party(), roster),
               ParseError);
  EXPECT_THROW(parse_plot_and_roles("no json", party(), roster), ParseError);
}

TEST(StageOne, ReasksOnBadRoles) {
  auto s = bare();
  s.chat->push("stage1.plot_roles", "{\"plot\": \"x\"}");
  s.chat->push("stage1.plot_roles", plot_roles_json());
  auto log = std::make_shared<CallLog>();
  auto ctx = scripted_context(s, log);
  auto m = fixture_manifest();
  auto one = run_stage_one(m, party(), original_dialogue(m), ctx);
  EXPECT_EQ(one.roles.size(), 2u);
  auto calls = calls_for(*log, "stage1.plot_roles");
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[1]["request"]["messages"].size(), 3u);
}

TEST(Broadcast, RejectsOutOfOrderRounds) {
  std::vector<AgentState> states{AgentState{Role{1, "A", ""}, {}, 0}, AgentState{Role{2, "B", ""}, {}, 0}};
  DialogueTurn t;
  t.round = 2;
  t.speaker_id = 1;
  t.sentence = "x";
  EXPECT_THROW(broadcast_update(states, t), RoundMismatch);
  t.round = 1;
  auto next = broadcast_update(states, t);
  for (const auto& a : next) {
    EXPECT_EQ(a.round, 1);
    EXPECT_EQ(a.memory.back(), (MemoryEntry{MemoryKind::Generated, 1, 1, "x"}));
  }
}

TEST(Perception, BackendFailureDegrades) {
  auto s = bare();
  auto v = std::make_shared<ScriptedVisionBackend>();
  v->set_default("behavior", ScriptItem::failure("transport"));
  v->set_default("emotion", ScriptItem::reply("sad"));
  s.vision = v;
  auto ctx = scripted_context(s, nullptr);
  auto m = fixture_manifest();
  auto p = perceive_turn(m.segments[0], m.roster[0], ctx);
  EXPECT_TRUE(p.degraded);
  EXPECT_TRUE(p.behavior.empty());
  EXPECT_EQ(p.frame_refs_used.size(), 8u);
}

TEST(Pipeline, AbortCarriesPartialTranscript) {
  auto s = bare();
  s.chat->push("stage1.plot_roles", plot_roles_json());
  s.chat->push("stage2.predict", answer("One."));
  s.chat->push("stage3.critique", accept_json());
  try {
    run_dialogue(fixture_manifest(), party(), scripted_context(s, nullptr));
    FAIL();
  } catch (const RunAborted& e) {
    EXPECT_EQ(e.stage(), "rounds");
    EXPECT_EQ(e.exit_code(), ExitCode::Backend);
    EXPECT_EQ(e.partial()["transcript"]["turns"].size(), 1u);
  }
}

TEST(Pipeline, FixtureRunsFast) {
  auto start = std::chrono::steady_clock::now();
  auto s = fixture_script();
  run_dialogue(fixture_manifest(), party(), scripted_context(s, nullptr));
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}
