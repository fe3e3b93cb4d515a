#include "scenedialog/baselines.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "scenedialog/errors.hpp"
#include "scenedialog/ingest.hpp"
#include "scenedialog/text.hpp"

namespace scenedialog {

namespace {

std::string name_for(std::span<const Role> roles, CharacterId id) {
  for (const auto& r : roles)
    if (r.character_id == id) return r.name;
  return "Speaker " + std::to_string(id);
}

std::string lines_of(const std::vector<std::string>& lines, std::string_view empty) {
  if (lines.empty()) return std::string(empty);
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

// Who answers to `name`: a role name, "Speaker <id>" or "Character <id>".
std::optional<CharacterId> resolve_speaker(std::string name, std::span<const Role> roles) {
  name = to_lower(trim(name));
  for (const auto& r : roles)
    if (to_lower(r.name) == name) return r.character_id;
  for (std::string_view prefix : {"speaker ", "character "}) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string rest = trim(name.substr(prefix.size()));
    if (!rest.empty() && std::all_of(rest.begin(), rest.end(), ::isdigit)) {
      const int id = std::stoi(rest);
      for (const auto& r : roles)
        if (r.character_id == id) return id;
    }
  }
  return std::nullopt;
}

std::map<std::string, std::string> bindings_for(const BaselineInputs& in) {
  std::vector<std::string> roles, dialogue, turns;
  for (const auto& r : in.roles)
    roles.push_back("- " + r.name + (r.description.empty() ? "" : ": " + r.description));
  for (const auto& e : in.original) dialogue.push_back(name_for(in.roles, e.speaker_id) + ": " + e.sentence);
  const std::string na = "(not available)";
  for (std::size_t i = 0; i < in.segments.size(); ++i) {
    const auto& s = in.segments[i];
    const auto& p = in.perceptions[i];
    turns.push_back("Turn " + std::to_string(i + 1) + ": " + name_for(in.roles, s.speaker_id) +
                    " speaks for " + format_fixed(s.duration_s(), 1) + " s. Behavior: " +
                    (p.behavior.empty() ? na : p.behavior) +
                    ". Emotion: " + (p.emotion.empty() ? na : p.emotion) + ".");
  }
  const std::string dialogue_text = lines_of(dialogue, "(none)");
  return {{"theme", in.theme.text},
          {"plot", in.plot.summary},
          {"roles", lines_of(roles, "")},
          {"original_dialogue", dialogue_text},
          {"context_dialogue", dialogue_text},
          {"turns", lines_of(turns, "")},
          {"turn_count", std::to_string(in.segments.size())}};
}

void check_inputs(const BaselineInputs& in) {
  if (in.segments.empty()) throw PreconditionError("baseline needs at least one segment");
  if (in.perceptions.size() != in.segments.size())
    throw PreconditionError("baseline needs one perception per segment");
  if (in.roles.empty()) throw PreconditionError("baseline needs stage-1 roles");
}

Transcript one_shot(const BaselineInputs& in, ChatRequest request, const ChatClient& client,
                    const TemplateStore& prompts, const std::string& method) {
  std::string reply = client(request);
  std::vector<std::string> lines;
  try {
    lines = parse_baseline_lines(reply, in.roles, in.segments);
  } catch (const ParseError& e) {
    request.messages.push_back(ChatMessage{MessageRole::Assistant, reply});
    request.messages.push_back(
        ChatMessage{MessageRole::User, prompts.render("reask", {{"problem", e.what()}})});
    lines = parse_baseline_lines(client(request), in.roles, in.segments);
  }

  Transcript t;
  t.theme = in.theme;
  t.plot = in.plot;
  t.roles = in.roles;
  t.method = method;
  for (std::size_t i = 0; i < in.segments.size(); ++i) {
    DialogueTurn turn;
    turn.round = static_cast<int>(i) + 1;
    turn.speaker_id = in.segments[i].speaker_id;
    turn.sentence = lines[i];
    turn.perception = in.perceptions[i];
    turn.iterations_used = 1;
    turn.accepted = true;
    t.turns.push_back(std::move(turn));
  }
  return t;
}

ChatRequest one_shot_request(std::string prompt, const PipelineConfig& config, const char* tag) {
  ChatRequest r;
  r.messages = {ChatMessage{MessageRole::User, std::move(prompt)}};
  r.temperature = config.generation_temperature;
  // One reply holds every line.
  r.max_tokens = std::max(config.max_tokens, 2048);
  r.purpose = tag;
  return r;
}

}  // namespace

std::vector<std::string> parse_baseline_lines(std::string_view reply, std::span<const Role> roles,
                                              std::span<const Segment> segments) {
  std::vector<std::string> out;
  for (std::string line : split_lines(reply)) {
    line = trim(line);
    // List markers: "1.", "2)", "-", "*".
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) line = trim(line.substr(i + 1));
    if (!line.empty() && (line[0] == '-' || line[0] == '*') && line.rfind("**", 0) != 0)
      line = trim(line.substr(1));
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string name = line.substr(0, colon);
    name.erase(std::remove(name.begin(), name.end(), '*'), name.end());
    auto speaker = resolve_speaker(name, roles);
    if (!speaker) continue;
    std::string sentence = line.substr(colon + 1);
    sentence.erase(0, sentence.find_first_not_of("* \t"));
    sentence = trim(sentence);
    if (sentence.size() >= 2 && sentence.front() == '"' && sentence.back() == '"')
      sentence = trim(sentence.substr(1, sentence.size() - 2));
    if (sentence.empty()) throw ParseError("line for '" + trim(name) + "' is empty");
    const std::size_t pos = out.size();
    if (pos < segments.size() && *speaker != segments[pos].speaker_id)
      spdlog::warn("baseline line {} is attributed to {} but segment speaker is {}", pos + 1,
                   *speaker, segments[pos].speaker_id);
    out.push_back(std::move(sentence));
  }
  if (out.size() != segments.size())
    throw ParseError("expected " + std::to_string(segments.size()) + " dialogue lines, got " +
                     std::to_string(out.size()));
  return out;
}

Transcript text_baseline(const BaselineInputs& in, const ChatClient& llm,
                         const TemplateStore& prompts, const PipelineConfig& config,
                         const std::string& template_id) {
  check_inputs(in);
  if (!llm) throw BackendUnavailable("no chat backend configured");
  auto prompt = prompts.render(template_id, bindings_for(in));
  return one_shot(in, one_shot_request(std::move(prompt), config, purpose::kBaselineText), llm,
                  prompts, "text");
}

Transcript image_baseline(const BaselineInputs& in, std::span<const std::string> key_frames,
                          const ChatClient& vision_chat, const TemplateStore& prompts,
                          const PipelineConfig& config) {
  check_inputs(in);
  if (!vision_chat || !vision_chat.backend->supports_images())
    throw BackendUnavailable("no chat backend that accepts images is configured");
  if (key_frames.size() != in.segments.size())
    throw PreconditionError("image baseline needs one key frame per segment");
  auto request = one_shot_request(prompts.render("baseline_image", bindings_for(in)), config,
                                  purpose::kBaselineImage);
  request.attachments.assign(key_frames.begin(), key_frames.end());
  return one_shot(in, std::move(request), vision_chat, prompts, "image");
}

namespace {

template <typename Finish>
Transcript run_one_shot(const VideoManifest& manifest, const Theme& theme,
                        const PipelineContext& ctx, const std::string& method, Finish&& finish) {
  require_valid(manifest);
  validate(ctx.config);
  if (!ctx.prompts) throw PreconditionError("pipeline context has no prompt templates");
  Transcript t;
  t.theme = theme;
  t.manifest_ref = manifest.video_id;
  t.method = method;
  std::string stage = "stage1";
  try {
    BaselineInputs in;
    in.theme = theme;
    in.original = original_dialogue(manifest);
    auto one = run_stage_one(manifest, theme, in.original, ctx);
    in.plot = t.plot = one.plot;
    in.roles = t.roles = one.roles;
    stage = "perception";
    in.segments = manifest.segments;
    for (const auto& s : in.segments)
      in.perceptions.push_back(perceive_turn(s, *manifest.find_character(s.speaker_id), ctx));
    stage = "generation";
    t = finish(in);
    t.manifest_ref = manifest.video_id;
  } catch (const Error& e) {
    throw RunAborted(e, stage, json{{"stage", stage}, {"transcript", t}});
  }
  return t;
}

}  // namespace

Transcript run_text_baseline(const VideoManifest& manifest, const Theme& theme,
                             const PipelineContext& ctx) {
  return run_one_shot(manifest, theme, ctx, "text", [&](const BaselineInputs& in) {
    return text_baseline(in, ctx.llm, *ctx.prompts, ctx.config);
  });
}

Transcript run_image_baseline(const VideoManifest& manifest, const Theme& theme,
                              const PipelineContext& ctx, const ChatClient& vision_chat) {
  // Fail before stage 1 rather than after spending calls on it.
  if (!vision_chat || !vision_chat.backend->supports_images())
    throw BackendUnavailable("no chat backend that accepts images is configured");
  return run_one_shot(manifest, theme, ctx, "image", [&](const BaselineInputs& in) {
    std::vector<std::string> frames;
    for (const auto& s : in.segments) frames.push_back(middle_frame(s));
    return image_baseline(in, frames, vision_chat, *ctx.prompts, ctx.config);
  });
}

// ---- last-K ----------------------------------------------------------------

PredictionMethod prediction_method_from_string(std::string_view s) {
  if (s == "pipeline") return PredictionMethod::Pipeline;
  if (s == "text") return PredictionMethod::TextBaseline;
  throw UsageError("unknown prediction method '" + std::string(s) + "' (pipeline|text)");
}

std::string_view to_string(PredictionMethod m) {
  return m == PredictionMethod::Pipeline ? "pipeline" : "text";
}

LastKResult last_k_prediction(const VideoManifest& manifest, int k, PredictionMethod method,
                              const Theme& theme, const PipelineContext& ctx) {
  require_valid(manifest);
  validate(ctx.config);
  if (!ctx.prompts) throw PreconditionError("pipeline context has no prompt templates");
  const int total = static_cast<int>(manifest.segments.size());
  if (k < 1 || k >= total)
    throw PreconditionError("k must satisfy 1 <= k < " + std::to_string(total) + ", got " +
                            std::to_string(k));
  const std::size_t cut = static_cast<std::size_t>(total - k);

  const auto context = original_dialogue(manifest, cut);
  const auto one = run_stage_one(manifest, theme, context, ctx);
  const std::span<const Segment> held(manifest.segments.data() + cut, static_cast<std::size_t>(k));

  LastKResult r;
  r.k = k;
  for (const auto& s : held) {
    r.segment_indices.push_back(s.index);
    r.speakers.push_back(s.speaker_id);
    r.references.push_back(s.original_utterance);
  }

  if (method == PredictionMethod::Pipeline) {
    auto states = init_agents(one.plot, one.roles, context);
    std::optional<PreviousLine> opening;
    const Segment& last = manifest.segments[cut - 1];
    if (!trim(last.original_utterance).empty())
      opening = PreviousLine{last.speaker_id, name_for(one.roles, last.speaker_id),
                             last.original_utterance};
    std::vector<DialogueTurn> turns;
    play_rounds(held, states, manifest.roster, theme, one.plot, one.roles, opening, ctx, turns);
    for (const auto& t : turns) r.predictions.push_back(t.sentence);
  } else {
    BaselineInputs in;
    in.theme = theme;
    in.plot = one.plot;
    in.roles = one.roles;
    in.original = context;
    in.segments.assign(held.begin(), held.end());
    for (const auto& s : held)
      in.perceptions.push_back(perceive_turn(s, *manifest.find_character(s.speaker_id), ctx));
    auto t = text_baseline(in, ctx.llm, *ctx.prompts, ctx.config, "baseline_continue");
    for (const auto& turn : t.turns) r.predictions.push_back(turn.sentence);
  }
  return r;
}

std::vector<PredictionScore> score_predictions(const LastKResult& result,
                                               const EmbeddingClient& embedder) {
  if (result.predictions.size() != result.references.size())
    throw LengthMismatch("predictions and references differ in length");
  std::vector<PredictionScore> out;
  for (std::size_t i = 0; i < result.predictions.size(); ++i) {
    const auto& p = result.predictions[i];
    const auto& ref = result.references[i];
    out.push_back(PredictionScore{rouge_l(std::string_view(p), std::string_view(ref)),
                                  meteor(std::string_view(p), std::string_view(ref)),
                                  bert_score(p, ref, embedder)});
  }
  return out;
}

}  // namespace scenedialog
