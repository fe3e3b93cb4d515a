#pragma once

// The three-stage dialogue agent: theme-aware role generation, perception-
// conditioned turn prediction by per-character sub-agents, and the central
// agent's critique/regenerate loop, assembled into a Transcript.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenedialog/backends.hpp"
#include "scenedialog/errors.hpp"
#include "scenedialog/model.hpp"

namespace scenedialog {

struct PipelineConfig {
  int max_iterations = 3;  // N
  double generation_temperature = 0.7;
  double critique_temperature = 0.0;
  int max_frames_per_turn = 8;
  int memory_token_budget = 1024;
  double speaking_rate_wps = kDefaultSpeakingRateWps;
  int max_tokens = 512;
  bool operator==(const PipelineConfig&) const = default;
};

void validate(const PipelineConfig& config);
void to_json(json& j, const PipelineConfig& v);
void from_json(const json& j, PipelineConfig& v);

// Request purposes, used for call-log labels and scripted routing.
namespace purpose {
inline constexpr const char* kPlotRoles = "stage1.plot_roles";
inline constexpr const char* kPredict = "stage2.predict";
inline constexpr const char* kCritique = "stage3.critique";
}  // namespace purpose

// Observer called after every broadcast with the round just completed.
using RoundObserver = std::function<void(int round, const std::vector<AgentState>& states)>;

struct PipelineContext {
  ChatClient llm;
  VisionClient vision;
  std::shared_ptr<const TemplateStore> prompts;
  PipelineConfig config;
  RoundObserver on_round;
};

// The sentence a sub-agent is replying to.
struct PreviousLine {
  CharacterId speaker_id = 0;
  std::string speaker_name;
  std::string sentence;
};

// Raised when a run aborts; carries the partial transcript for inspection.
class RunAborted : public Error {
 public:
  RunAborted(const Error& cause, std::string stage, json partial)
      : Error(cause.kind(), cause.exit_code(), cause.what()),
        stage_(std::move(stage)),
        partial_(std::move(partial)) {}
  const std::string& stage() const { return stage_; }
  const json& partial() const { return partial_; }

 private:
  std::string stage_;
  json partial_;
};

// ---- stage 1 ---------------------------------------------------------------

// Rough whole-video description from the first frame.
std::string describe_first_frame(const VideoManifest& manifest, const PipelineContext& ctx);

// The manifest's utterances as original-kind memory entries. `limit` keeps
// only the first `limit` segments.
std::vector<MemoryEntry> original_dialogue(const VideoManifest& manifest,
                                           std::optional<std::size_t> limit = std::nullopt);

// Parses {"plot": str, "roles": [{"character_id", "name", "description"}]}
// and requires exactly one role per roster character.
std::pair<Plot, std::vector<Role>> parse_plot_and_roles(std::string_view response,
                                                        const Theme& theme,
                                                        std::span<const Character> roster);

std::pair<Plot, std::vector<Role>> generate_plot_and_roles(
    const Theme& theme, const std::string& first_frame_description,
    std::span<const MemoryEntry> original, std::span<const Character> roster,
    const PipelineContext& ctx);

struct StageOne {
  std::string scene;  // first-frame description
  Plot plot;
  std::vector<Role> roles;
};

// Scene description plus plot and roles, conditioned on `original` only.
StageOne run_stage_one(const VideoManifest& manifest, const Theme& theme,
                       std::span<const MemoryEntry> original, const PipelineContext& ctx);

std::vector<AgentState> init_agents(const Plot& plot, std::span<const Role> roles,
                                    std::span<const MemoryEntry> original);

// ---- stage 2 ---------------------------------------------------------------

// Two vision calls (behavior, emotion) over the selected frames. Backend
// failures or empty replies yield a degraded perception and a warning.
Perception perceive_turn(const Segment& segment, const Character& speaker,
                         const PipelineContext& ctx);

// Memory trimmed to `budget` words: oldest original entries go first, then
// oldest generated ones; generated entries from the two most recent rounds
// are always kept.
std::vector<MemoryEntry> budget_memory(std::span<const MemoryEntry> memory, int budget,
                                       int current_round);

// Text after the final "ANSWER:" marker; empty when there is none.
std::string extract_answer(std::string_view response);

std::string predict_turn(const AgentState& state, const Perception& perception,
                         const std::optional<PreviousLine>& previous,
                         const std::optional<std::string>& suggestion, const Theme& theme,
                         const Plot& plot, std::span<const Role> roles,
                         const PipelineContext& ctx);

// ---- stage 3 ---------------------------------------------------------------

// max(3, ceil(rate * duration)).
int word_budget(double speaking_rate_wps, double duration_s);

struct CritiqueVerdicts {
  bool theme_contextual = true;
  bool pairwise_continuity = true;
  bool global_coherence = true;
  std::string suggestion;
};

// Parses the critic's JSON verdicts; throws ParseError.
CritiqueVerdicts parse_critique(std::string_view response);

struct HistoryLine {
  std::string speaker_name;
  std::string sentence;
};

Suggestion critique_turn(const Theme& theme, const Plot& plot, const std::string& draft,
                         const std::optional<PreviousLine>& previous,
                         std::span<const HistoryLine> history, const Segment& segment,
                         const std::string& speaker_name, const PipelineContext& ctx);

// Every agent (speaker included) records the turn; rounds advance to turn.round.
std::vector<AgentState> broadcast_update(std::vector<AgentState> states, const DialogueTurn& turn);

// ---- orchestration ---------------------------------------------------------

// Plays one round per segment, numbering rounds from the agents' current
// round + 1, and appends each finished turn to `turns`. `opening` is the line
// the first round replies to, if any.
void play_rounds(std::span<const Segment> segments, std::vector<AgentState>& states,
                 std::span<const Character> roster, const Theme& theme, const Plot& plot,
                 std::span<const Role> roles, std::optional<PreviousLine> opening,
                 const PipelineContext& ctx, std::vector<DialogueTurn>& turns);

Transcript run_dialogue(const VideoManifest& manifest, const Theme& theme,
                        const PipelineContext& ctx);

}  // namespace scenedialog
