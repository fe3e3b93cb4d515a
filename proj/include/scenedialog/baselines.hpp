#pragma once

// One-shot comparison methods (text only, text + key frames) and the
// held-out last-K prediction harness.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenedialog/backends.hpp"
#include "scenedialog/metrics.hpp"
#include "scenedialog/model.hpp"
#include "scenedialog/pipeline.hpp"

namespace scenedialog {

namespace purpose {
inline constexpr const char* kBaselineText = "baseline.text";
inline constexpr const char* kBaselineImage = "baseline.image";
}  // namespace purpose

struct BaselineInputs {
  Theme theme;
  Plot plot;
  std::vector<Role> roles;
  std::vector<Segment> segments;        // turns to write, in order
  std::vector<Perception> perceptions;  // one per segment
  std::vector<MemoryEntry> original;    // dialogue shown to the model
};

// "<Role name>: <line>" (or "Speaker <id>: <line>") per line; other lines are
// ignored. Exactly one line per segment or ParseError.
std::vector<std::string> parse_baseline_lines(std::string_view reply, std::span<const Role> roles,
                                              std::span<const Segment> segments);

// Single generation call. `template_id` selects the prompt.
Transcript text_baseline(const BaselineInputs& in, const ChatClient& llm,
                         const TemplateStore& prompts, const PipelineConfig& config,
                         const std::string& template_id = "baseline_text");

// As text_baseline, with one key frame per segment attached to the request.
Transcript image_baseline(const BaselineInputs& in, std::span<const std::string> key_frames,
                          const ChatClient& vision_chat, const TemplateStore& prompts,
                          const PipelineConfig& config);

// Stage 1 and per-segment perception, then the one-shot call. Aborts carry
// the partial transcript like run_dialogue.
Transcript run_text_baseline(const VideoManifest& manifest, const Theme& theme,
                             const PipelineContext& ctx);
Transcript run_image_baseline(const VideoManifest& manifest, const Theme& theme,
                              const PipelineContext& ctx, const ChatClient& vision_chat);

// ---- last-K ----------------------------------------------------------------

enum class PredictionMethod { Pipeline, TextBaseline };
PredictionMethod prediction_method_from_string(std::string_view s);  // "pipeline" | "text"
std::string_view to_string(PredictionMethod m);

struct LastKResult {
  int k = 0;
  std::vector<int> segment_indices;  // the held-out segments
  std::vector<CharacterId> speakers;
  std::vector<std::string> predictions;
  std::vector<std::string> references;  // held-out originals, never sent to a model
};

// Every model-facing surface (stage 1, memory, prompts) sees only the first
// T - k utterances; rounds T - k + 1 .. T are predicted.
LastKResult last_k_prediction(const VideoManifest& manifest, int k, PredictionMethod method,
                              const Theme& theme, const PipelineContext& ctx);

struct PredictionScore {
  double rouge_l = 0.0;
  double meteor = 0.0;
  std::optional<double> bert_score;  // nullopt: unavailable
};

std::vector<PredictionScore> score_predictions(const LastKResult& result,
                                               const EmbeddingClient& embedder);

}  // namespace scenedialog
