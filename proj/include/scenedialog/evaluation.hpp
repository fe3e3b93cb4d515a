#pragma once

// Six-metric judge benchmark (score + comment per metric) and per-theme
// aggregation of the resulting reports.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenedialog/backends.hpp"
#include "scenedialog/model.hpp"

namespace scenedialog {

struct JudgeConfig {
  BackendConfig backend;
  double temperature = 0.0;
  std::map<MetricId, PromptTemplate> rubric_templates;
  int max_tokens = 256;
};

// temperature must be exactly 0 and every metric needs a rubric.
void validate(const JudgeConfig& config);

// Rubrics "judge_<ID>" from the store.
JudgeConfig make_judge_config(const TemplateStore& prompts, BackendConfig backend);

// What the judge sees besides the dialogue itself.
struct EvalContext {
  Theme theme;
  std::optional<std::vector<std::string>> original_dialogue;  // "Name: line"
  std::optional<std::vector<std::string>> perception;         // one line per turn
  bool operator==(const EvalContext&) const = default;
};

void to_json(json& j, const EvalContext& v);
void from_json(const json& j, EvalContext& v);

// Context for judging `transcript` against the clip it was written for.
EvalContext make_eval_context(const VideoManifest& manifest, const Transcript& transcript);

struct Judge {
  std::shared_ptr<ChatBackend> backend;
  JudgeConfig config;
  std::shared_ptr<CallLog> log;
  Sleeper sleeper = sleep_seconds;
};

struct ScoreComment {
  int score = 0;
  std::string comment;
};

// Strict {"score", "comment"} object first, then the first standalone integer
// followed by prose. Scores outside 1..5 and empty comments are ParseError.
ScoreComment parse_score_comment(std::string_view raw);

// "Name: sentence" per turn.
std::string render_dialogue(const Transcript& transcript);

MetricScore evaluate_metric(const Transcript& transcript, const EvalContext& context,
                            MetricId metric, const Judge& judge);

// Failed metrics are recorded with their reason and excluded; the average is
// set only when all six succeeded.
EvalReport evaluate_all(const Transcript& transcript, const EvalContext& context,
                        const Judge& judge);

// ---- aggregation -----------------------------------------------------------

struct ThemeAggregate {
  Theme theme;
  MetricId metric = MetricId::TR;
  double mean = 0.0;
  double variance = 0.0;  // population
  int n = 0;
  int excluded = 0;  // reports where this metric failed
};

struct CrossThemeVariance {
  MetricId metric = MetricId::TR;
  double variance = 0.0;  // population variance of per-theme means
  int themes = 0;
};

struct AggregateResult {
  std::vector<ThemeAggregate> rows;  // theme order of first appearance, metric order
  std::vector<CrossThemeVariance> cross_theme;
  std::vector<Theme> themes;
};

// Mean and population variance. Empty input is PreconditionError.
std::pair<double, double> mean_and_variance(std::span<const double> values);

AggregateResult aggregate_by_theme(std::span<const std::pair<Theme, EvalReport>> reports);

// Mean over the six metric means of one theme; nullopt when one is missing.
std::optional<double> theme_average(const AggregateResult& result, const Theme& theme);

// theme,TR,GQ,LC,CD,VC,SC,Average with two-decimal means.
std::string aggregate_table_csv(const AggregateResult& result);
// Long-format plot data: theme,metric,mean,variance,n,excluded.
std::string chart_data_csv(const AggregateResult& result);
// metric,variance,themes.
std::string cross_theme_csv(const AggregateResult& result);

// One report as a row: transcript,theme,TR,...,SC,Average (blank when failed).
std::string report_csv(const EvalReport& report);

// Quotes a CSV field when needed.
std::string csv_field(std::string_view s);

}  // namespace scenedialog
