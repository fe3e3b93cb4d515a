#include "scenedialog/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <spdlog/spdlog.h>

#include "scenedialog/ingest.hpp"
#include "scenedialog/text.hpp"

namespace scenedialog {

void validate(const PipelineConfig& c) {
  if (c.max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(c.generation_temperature >= 0.0) || !std::isfinite(c.generation_temperature))
    throw ValidationError("generation_temperature must be finite and >= 0");
  if (!(c.critique_temperature >= 0.0) || !std::isfinite(c.critique_temperature))
    throw ValidationError("critique_temperature must be finite and >= 0");
  if (c.max_frames_per_turn < 1) throw ValidationError("max_frames_per_turn must be >= 1");
  if (c.memory_token_budget < 1) throw ValidationError("memory_token_budget must be >= 1");
  if (!(c.speaking_rate_wps > 0.0)) throw ValidationError("speaking_rate_wps must be positive");
  if (c.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
}

void to_json(json& j, const PipelineConfig& v) {
  j = json{{"max_iterations", v.max_iterations},
           {"generation_temperature", v.generation_temperature},
           {"critique_temperature", v.critique_temperature},
           {"max_frames_per_turn", v.max_frames_per_turn},
           {"memory_token_budget", v.memory_token_budget},
           {"speaking_rate_wps", v.speaking_rate_wps},
           {"max_tokens", v.max_tokens}};
}

void from_json(const json& j, PipelineConfig& v) {
  PipelineConfig d;
  v.max_iterations = j.value("max_iterations", d.max_iterations);
  v.generation_temperature = j.value("generation_temperature", d.generation_temperature);
  v.critique_temperature = j.value("critique_temperature", d.critique_temperature);
  v.max_frames_per_turn = j.value("max_frames_per_turn", d.max_frames_per_turn);
  v.memory_token_budget = j.value("memory_token_budget", d.memory_token_budget);
  v.speaking_rate_wps = j.value("speaking_rate_wps", d.speaking_rate_wps);
  v.max_tokens = j.value("max_tokens", d.max_tokens);
}

namespace {

const TemplateStore& prompts_of(const PipelineContext& ctx) {
  if (!ctx.prompts) throw PreconditionError("pipeline context has no prompt templates");
  return *ctx.prompts;
}

std::string role_name(std::span<const Role> roles, CharacterId id) {
  for (const auto& r : roles)
    if (r.character_id == id) return r.name;
  return "Speaker " + std::to_string(id);
}

std::string speaker_label(std::span<const Character> roster, CharacterId id) {
  for (const auto& c : roster)
    if (c.id == id) {
      std::string label = c.label.empty() ? "Speaker " + std::to_string(id) : c.label;
      if (c.visual_descriptor && !c.visual_descriptor->empty())
        label += " (" + *c.visual_descriptor + ")";
      return label;
    }
  return "Speaker " + std::to_string(id);
}

std::string bulleted(const std::vector<std::string>& lines, std::string_view empty) {
  if (lines.empty()) return std::string(empty);
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

ChatRequest user_request(std::string prompt, double temperature, const PipelineContext& ctx,
                         const char* purpose_tag) {
  ChatRequest r;
  r.messages = {ChatMessage{MessageRole::User, std::move(prompt)}};
  r.temperature = temperature;
  r.max_tokens = ctx.config.max_tokens;
  r.purpose = purpose_tag;
  return r;
}

// Sends `request`; on a parse failure re-asks once in the same conversation.
template <typename Parse>
auto ask_with_reask(ChatRequest request, const ChatClient& client, const TemplateStore& prompts,
                    Parse&& parse) {
  std::string reply = client(request);
  try {
    return parse(reply);
  } catch (const ParseError& first) {
    request.messages.push_back(ChatMessage{MessageRole::Assistant, reply});
    request.messages.push_back(
        ChatMessage{MessageRole::User, prompts.render("reask", {{"problem", first.what()}})});
    reply = client(request);
    return parse(reply);
  }
}

}  // namespace

// ---- stage 1 ---------------------------------------------------------------

std::string describe_first_frame(const VideoManifest& manifest, const PipelineContext& ctx) {
  if (manifest.first_frame_ref.empty()) throw FrameNotFound("manifest has no first frame");
  VisionRequest req;
  req.frame_refs = {manifest.first_frame_ref};
  req.prompt = prompts_of(ctx).render("stage1_scene", {});
  req.kind = "scene";
  std::string text = trim(ctx.vision(req));
  if (text.empty()) throw MalformedResponseError("vision backend returned an empty scene description");
  return text;
}

std::vector<MemoryEntry> original_dialogue(const VideoManifest& manifest,
                                           std::optional<std::size_t> limit) {
  std::vector<MemoryEntry> out;
  const std::size_t n = std::min(limit.value_or(manifest.segments.size()), manifest.segments.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = manifest.segments[i];
    if (trim(s.original_utterance).empty()) continue;
    out.push_back(MemoryEntry{MemoryKind::Original, 0, s.speaker_id, s.original_utterance});
  }
  return out;
}

std::pair<Plot, std::vector<Role>> parse_plot_and_roles(std::string_view response,
                                                        const Theme& theme,
                                                        std::span<const Character> roster) {
  auto obj = extract_json_object(response);
  if (!obj) throw ParseError("reply contains no JSON object");
  const json& j = *obj;
  if (!j.contains("plot") || !j["plot"].is_string() || trim(j["plot"].get<std::string>()).empty())
    throw ParseError("missing or empty \"plot\" field");
  if (!j.contains("roles") || !j["roles"].is_array()) throw ParseError("missing \"roles\" list");

  std::vector<Role> roles;
  for (const auto& r : j["roles"]) {
    if (!r.is_object() || !r.contains("character_id") || !r["character_id"].is_number_integer() ||
        !r.contains("name") || !r["name"].is_string())
      throw ParseError("each role needs an integer \"character_id\" and a \"name\"");
    Role role;
    role.character_id = r["character_id"].get<int>();
    role.name = trim(r["name"].get<std::string>());
    role.description = trim(r.value("description", std::string{}));
    if (role.name.empty()) throw ParseError("role name is empty");
    roles.push_back(std::move(role));
  }
  if (roles.size() != roster.size())
    throw ParseError("expected " + std::to_string(roster.size()) + " roles, got " +
                     std::to_string(roles.size()));
  std::vector<Role> ordered;
  for (const auto& c : roster) {
    auto hits = std::count_if(roles.begin(), roles.end(),
                              [&](const Role& r) { return r.character_id == c.id; });
    if (hits != 1)
      throw ParseError("character " + std::to_string(c.id) + " needs exactly one role, got " +
                       std::to_string(hits));
    ordered.push_back(*std::find_if(roles.begin(), roles.end(),
                                    [&](const Role& r) { return r.character_id == c.id; }));
  }
  return {Plot{trim(j["plot"].get<std::string>()), theme}, std::move(ordered)};
}

std::pair<Plot, std::vector<Role>> generate_plot_and_roles(
    const Theme& theme, const std::string& first_frame_description,
    std::span<const MemoryEntry> original, std::span<const Character> roster,
    const PipelineContext& ctx) {
  if (roster.empty()) throw PreconditionError("roster is empty");
  std::vector<std::string> dialogue, cast;
  for (const auto& e : original)
    dialogue.push_back(speaker_label(roster, e.speaker_id) + ": " + e.sentence);
  for (const auto& c : roster)
    cast.push_back("- id " + std::to_string(c.id) + ": " + speaker_label(roster, c.id));

  const auto& prompts = prompts_of(ctx);
  auto prompt = prompts.render("stage1_plot_roles",
                               {{"theme", theme.text},
                                {"scene_description", first_frame_description},
                                {"original_dialogue", bulleted(dialogue, "(none)")},
                                {"roster", bulleted(cast, "")},
                                {"character_count", std::to_string(roster.size())}});
  return ask_with_reask(
      user_request(std::move(prompt), ctx.config.generation_temperature, ctx, purpose::kPlotRoles),
      ctx.llm, prompts,
      [&](const std::string& reply) { return parse_plot_and_roles(reply, theme, roster); });
}

StageOne run_stage_one(const VideoManifest& manifest, const Theme& theme,
                       std::span<const MemoryEntry> original, const PipelineContext& ctx) {
  StageOne s;
  s.scene = describe_first_frame(manifest, ctx);
  std::tie(s.plot, s.roles) = generate_plot_and_roles(theme, s.scene, original, manifest.roster, ctx);
  return s;
}

std::vector<AgentState> init_agents(const Plot&, std::span<const Role> roles,
                                    std::span<const MemoryEntry> original) {
  std::vector<AgentState> states;
  states.reserve(roles.size());
  for (const auto& role : roles)
    states.push_back(AgentState{role, std::vector<MemoryEntry>(original.begin(), original.end()), 0});
  return states;
}

// ---- stage 2 ---------------------------------------------------------------

Perception perceive_turn(const Segment& segment, const Character& speaker,
                         const PipelineContext& ctx) {
  Perception p;
  p.frame_refs_used = select_frames(segment, ctx.config.max_frames_per_turn);
  const auto& prompts = prompts_of(ctx);
  const std::map<std::string, std::string> bindings{
      {"speaker_label", speaker_label(std::span(&speaker, 1), speaker.id)}};
  try {
    VisionRequest req;
    req.frame_refs = p.frame_refs_used;
    req.kind = "behavior";
    req.prompt = prompts.render("stage2_behavior", bindings);
    p.behavior = trim(ctx.vision(req));
    req.kind = "emotion";
    req.prompt = prompts.render("stage2_emotion", bindings);
    p.emotion = trim(ctx.vision(req));
    if (p.behavior.empty() || p.emotion.empty())
      throw MalformedResponseError("vision backend returned an empty description");
  } catch (const Error& e) {
    if (e.exit_code() != ExitCode::Backend) throw;
    spdlog::warn("perception degraded for segment {}: {}", segment.index, e.what());
    p.behavior.clear();
    p.emotion.clear();
    p.degraded = true;
  }
  return p;
}

std::vector<MemoryEntry> budget_memory(std::span<const MemoryEntry> memory, int budget,
                                       int current_round) {
  std::vector<MemoryEntry> kept(memory.begin(), memory.end());
  auto cost = [](const MemoryEntry& e) { return word_count(e.sentence); };
  int total = 0;
  for (const auto& e : kept) total += cost(e);
  auto is_protected = [&](const MemoryEntry& e) {
    return e.kind == MemoryKind::Generated && e.round > current_round - 2;
  };
  while (total > budget) {
    auto victim = std::find_if(kept.begin(), kept.end(),
                               [](const MemoryEntry& e) { return e.kind == MemoryKind::Original; });
    if (victim == kept.end())
      victim = std::find_if(kept.begin(), kept.end(),
                            [&](const MemoryEntry& e) { return !is_protected(e); });
    if (victim == kept.end()) break;
    total -= cost(*victim);
    kept.erase(victim);
  }
  return kept;
}

std::string extract_answer(std::string_view response) {
  const std::string lower = to_lower(response);
  const auto pos = lower.rfind("answer:");
  if (pos == std::string::npos) return {};
  std::string answer = trim(response.substr(pos + 7));
  // Join wrapped lines and drop surrounding quotes.
  std::replace(answer.begin(), answer.end(), '\n', ' ');
  answer = trim(answer);
  if (answer.size() >= 2 && answer.front() == '"' && answer.back() == '"')
    answer = trim(answer.substr(1, answer.size() - 2));
  return answer;
}

std::string predict_turn(const AgentState& state, const Perception& perception,
                         const std::optional<PreviousLine>& previous,
                         const std::optional<std::string>& suggestion, const Theme& theme,
                         const Plot& plot, std::span<const Role> roles,
                         const PipelineContext& ctx) {
  const auto& prompts = prompts_of(ctx);
  std::vector<std::string> memory_lines;
  for (const auto& e : budget_memory(state.memory, ctx.config.memory_token_budget, state.round)) {
    const std::string tag =
        e.kind == MemoryKind::Original ? "(original)" : "(round " + std::to_string(e.round) + ")";
    memory_lines.push_back(tag + " " + role_name(roles, e.speaker_id) + ": " + e.sentence);
  }
  const std::string unavailable = "(not available)";
  std::string previous_block, suggestion_block;
  if (previous)
    previous_block = prompts.render("stage2_predict_previous",
                                    {{"previous_speaker", previous->speaker_name},
                                     {"previous_sentence", previous->sentence}});
  if (suggestion && !suggestion->empty())
    suggestion_block = prompts.render("stage2_predict_suggestion", {{"suggestion", *suggestion}});

  auto prompt = prompts.render(
      "stage2_predict",
      {{"role_name", state.role.name},
       {"role_description", state.role.description},
       {"plot", plot.summary},
       {"theme", theme.text},
       {"memory", bulleted(memory_lines, "(nothing yet)")},
       {"behavior", perception.behavior.empty() ? unavailable : perception.behavior},
       {"emotion", perception.emotion.empty() ? unavailable : perception.emotion},
       {"previous_block", previous_block},
       {"suggestion_block", suggestion_block}});

  auto parse = [](const std::string& reply) {
    std::string answer = extract_answer(reply);
    if (answer.empty()) throw ParseError("reply has no non-empty ANSWER: field");
    return answer;
  };
  try {
    return ask_with_reask(
        user_request(std::move(prompt), ctx.config.generation_temperature, ctx, purpose::kPredict),
        ctx.llm, prompts, parse);
  } catch (const ParseError& e) {
    throw EmptyGeneration(state.role.name + " produced no line: " + e.what());
  }
}

// ---- stage 3 ---------------------------------------------------------------

int word_budget(double speaking_rate_wps, double duration_s) {
  // The epsilon keeps exact products such as 2.5 * 4 from rounding up past 10.
  const double raw = std::ceil(speaking_rate_wps * duration_s - 1e-9);
  return std::max(3, static_cast<int>(raw));
}

CritiqueVerdicts parse_critique(std::string_view response) {
  auto obj = extract_json_object(response);
  if (!obj) throw ParseError("reply contains no JSON object");
  CritiqueVerdicts v;
  auto flag = [&](const char* name) {
    if (!obj->contains(name) || !(*obj)[name].is_boolean())
      throw ParseError(std::string("missing boolean \"") + name + "\"");
    return (*obj)[name].get<bool>();
  };
  v.theme_contextual = flag("theme_contextual");
  v.pairwise_continuity = flag("pairwise_continuity");
  v.global_coherence = flag("global_coherence");
  if (obj->contains("suggestion") && (*obj)["suggestion"].is_string())
    v.suggestion = trim((*obj)["suggestion"].get<std::string>());
  return v;
}

Suggestion critique_turn(const Theme& theme, const Plot& plot, const std::string& draft,
                         const std::optional<PreviousLine>& previous,
                         std::span<const HistoryLine> history, const Segment& segment,
                         const std::string& speaker_name, const PipelineContext& ctx) {
  if (trim(draft).empty()) throw PreconditionError("cannot critique an empty draft");
  const auto& prompts = prompts_of(ctx);
  std::vector<std::string> history_lines;
  for (const auto& h : history) history_lines.push_back(h.speaker_name + ": " + h.sentence);
  auto prompt = prompts.render(
      "stage3_critique",
      {{"theme", theme.text},
       {"plot", plot.summary},
       {"history", bulleted(history_lines, "(this is the first line)")},
       {"previous", previous ? previous->speaker_name + ": " + previous->sentence
                             : std::string("(none; this is the opening line)")},
       {"speaker", speaker_name},
       {"draft", draft}});

  // Checks (a)-(c) come from the central agent, in that order.
  CritiqueVerdicts verdicts = ask_with_reask(
      user_request(std::move(prompt), ctx.config.critique_temperature, ctx, purpose::kCritique),
      ctx.llm, prompts, [](const std::string& reply) { return parse_critique(reply); });

  // Check (d) is deterministic: the line must fit the speaking period.
  const int budget = word_budget(ctx.config.speaking_rate_wps, segment.duration_s());
  const int words = word_count(draft);

  Suggestion s;
  s.checks = CritiqueChecks{verdicts.theme_contextual, verdicts.pairwise_continuity,
                            verdicts.global_coherence, words <= budget};
  if (s.checks.all_pass()) {
    s.verdict = Verdict::Accept;
    return s;
  }
  s.verdict = Verdict::Revise;
  const bool model_failed =
      !(verdicts.theme_contextual && verdicts.pairwise_continuity && verdicts.global_coherence);
  if (model_failed) {
    if (!verdicts.suggestion.empty()) {
      s.text = verdicts.suggestion;
    } else {
      std::vector<std::string> failed;
      if (!verdicts.theme_contextual) failed.push_back("stay on the theme and suit the situation");
      if (!verdicts.pairwise_continuity) failed.push_back("follow on from the previous line");
      if (!verdicts.global_coherence) failed.push_back("stay consistent with the conversation");
      s.text = "Rewrite the line so that it does the following: ";
      for (std::size_t i = 0; i < failed.size(); ++i) s.text += (i ? "; " : "") + failed[i];
      s.text += ".";
    }
  }
  if (!s.checks.length_fits) {
    if (!s.text.empty()) s.text += " ";
    s.text += "The line has " + std::to_string(words) + " words but only " +
              std::to_string(budget) + " fit in the " + format_fixed(segment.duration_s(), 1) +
              " s speaking window; shorten it to at most " + std::to_string(budget) + " words.";
  }
  return s;
}

std::vector<AgentState> broadcast_update(std::vector<AgentState> states, const DialogueTurn& turn) {
  for (const auto& s : states)
    if (turn.round != s.round + 1)
      throw RoundMismatch("turn round " + std::to_string(turn.round) + " cannot follow agent '" +
                          s.role.name + "' at round " + std::to_string(s.round));
  for (auto& s : states) {
    s.memory.push_back(MemoryEntry{MemoryKind::Generated, turn.round, turn.speaker_id, turn.sentence});
    s.round = turn.round;
  }
  return states;
}

// ---- orchestration ---------------------------------------------------------

void play_rounds(std::span<const Segment> segments, std::vector<AgentState>& states,
                 std::span<const Character> roster, const Theme& theme, const Plot& plot,
                 std::span<const Role> roles, std::optional<PreviousLine> opening,
                 const PipelineContext& ctx, std::vector<DialogueTurn>& turns) {
  validate(ctx.config);
  std::vector<HistoryLine> history;
  std::optional<PreviousLine> previous = std::move(opening);

  for (const auto& segment : segments) {
    auto speaker_state = std::find_if(states.begin(), states.end(), [&](const AgentState& s) {
      return s.role.character_id == segment.speaker_id;
    });
    if (speaker_state == states.end())
      throw PreconditionError("no agent for speaker " + std::to_string(segment.speaker_id));
    auto character = std::find_if(roster.begin(), roster.end(),
                                  [&](const Character& c) { return c.id == segment.speaker_id; });
    if (character == roster.end())
      throw PreconditionError("speaker " + std::to_string(segment.speaker_id) + " not in roster");

    DialogueTurn turn;
    turn.round = speaker_state->round + 1;
    turn.speaker_id = segment.speaker_id;
    turn.perception = perceive_turn(segment, *character, ctx);

    const std::string& name = speaker_state->role.name;
    std::optional<std::string> suggestion;
    turn.accepted = false;
    for (int n = 1; n <= ctx.config.max_iterations; ++n) {
      std::string draft = predict_turn(*speaker_state, turn.perception, previous, suggestion, theme,
                                       plot, roles, ctx);
      Suggestion verdict =
          critique_turn(theme, plot, draft, previous, history, segment, name, ctx);
      turn.sentence = draft;
      turn.iterations_used = n;
      if (verdict.verdict == Verdict::Accept) {
        turn.accepted = true;
        break;
      }
      suggestion = verdict.text;
      turn.revisions.push_back(Revision{std::move(draft), std::move(verdict)});
    }

    states = broadcast_update(std::move(states), turn);
    if (ctx.on_round) ctx.on_round(turn.round, states);
    history.push_back(HistoryLine{name, turn.sentence});
    previous = PreviousLine{turn.speaker_id, name, turn.sentence};
    turns.push_back(std::move(turn));
  }
}

Transcript run_dialogue(const VideoManifest& manifest, const Theme& theme,
                        const PipelineContext& ctx) {
  require_valid(manifest);
  validate(ctx.config);

  Transcript t;
  t.theme = theme;
  t.manifest_ref = manifest.video_id;
  t.method = "pipeline";
  std::string stage = "stage1";
  try {
    const auto original = original_dialogue(manifest);
    auto one = run_stage_one(manifest, theme, original, ctx);
    t.plot = std::move(one.plot);
    t.roles = std::move(one.roles);
    auto states = init_agents(t.plot, t.roles, original);

    stage = "rounds";
    // Turns are appended as they complete, so an abort keeps the ones so far.
    play_rounds(manifest.segments, states, manifest.roster, theme, t.plot, t.roles, std::nullopt,
                ctx, t.turns);
  } catch (const RunAborted&) {
    throw;
  } catch (const Error& e) {
    throw RunAborted(e, stage, json{{"stage", stage}, {"transcript", t}});
  }
  if (t.turns.size() != manifest.segments.size())
    throw ValidationError("transcript has " + std::to_string(t.turns.size()) + " turns for " +
                          std::to_string(manifest.segments.size()) + " segments");
  return t;
}

}  // namespace scenedialog
