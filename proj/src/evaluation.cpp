#include "scenedialog/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "scenedialog/errors.hpp"
#include "scenedialog/text.hpp"

namespace scenedialog {

void validate(const JudgeConfig& c) {
  validate(c.backend);
  if (c.temperature != 0.0) throw ValidationError("judge temperature must be 0");
  if (c.max_tokens < 1) throw ValidationError("judge max_tokens must be >= 1");
  for (MetricId m : kAllMetrics)
    if (!c.rubric_templates.count(m))
      throw ValidationError("no rubric template for metric " + std::string(to_string(m)));
}

JudgeConfig make_judge_config(const TemplateStore& prompts, BackendConfig backend) {
  JudgeConfig c;
  c.backend = std::move(backend);
  for (MetricId m : kAllMetrics)
    c.rubric_templates[m] = prompts.get("judge_" + std::string(to_string(m)));
  return c;
}

void to_json(json& j, const EvalContext& v) {
  j = json{{"theme", v.theme.text},
           {"original_dialogue", v.original_dialogue ? json(*v.original_dialogue) : json(nullptr)},
           {"perception", v.perception ? json(*v.perception) : json(nullptr)}};
}

void from_json(const json& j, EvalContext& v) {
  v.theme = make_theme(j.at("theme").get<std::string>());
  v.original_dialogue.reset();
  v.perception.reset();
  if (j.contains("original_dialogue") && !j["original_dialogue"].is_null())
    v.original_dialogue = j["original_dialogue"].get<std::vector<std::string>>();
  if (j.contains("perception") && !j["perception"].is_null())
    v.perception = j["perception"].get<std::vector<std::string>>();
}

EvalContext make_eval_context(const VideoManifest& manifest, const Transcript& transcript) {
  EvalContext c;
  c.theme = transcript.theme;
  auto name_of = [&](CharacterId id) {
    if (const Role* r = transcript.find_role(id)) return r->name;
    if (const Character* ch = manifest.find_character(id)) return ch->label;
    return "Speaker " + std::to_string(id);
  };
  std::vector<std::string> original;
  for (const auto& s : manifest.segments)
    if (!trim(s.original_utterance).empty())
      original.push_back(name_of(s.speaker_id) + ": " + s.original_utterance);
  c.original_dialogue = std::move(original);

  std::vector<std::string> perception;
  const std::string na = "(not available)";
  for (const auto& t : transcript.turns) {
    const auto& p = t.perception;
    perception.push_back("Turn " + std::to_string(t.round) + ", " + name_of(t.speaker_id) +
                         ": behavior: " + (p.behavior.empty() ? na : p.behavior) +
                         "; emotion: " + (p.emotion.empty() ? na : p.emotion));
  }
  c.perception = std::move(perception);
  return c;
}

// ---- judge -----------------------------------------------------------------

namespace {

void check_range(long long score) {
  if (score < 1 || score > 5)
    throw ParseError("score " + std::to_string(score) + " is outside 1..5");
}

std::string lenient_comment(std::string_view rest) {
  std::string s = trim(rest);
  // "3/5", "3 out of 5"
  for (std::string_view scale : {"/5", "/ 5", "out of 5"})
    if (to_lower(s).rfind(scale, 0) == 0) s = trim(s.substr(scale.size()));
  std::size_t i = 0;
  while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) ||
                          std::string_view(".,:;-)]").find(s[i]) != std::string_view::npos))
    ++i;
  return trim(s.substr(i));
}

}  // namespace

ScoreComment parse_score_comment(std::string_view raw) {
  if (auto obj = extract_json_object(raw); obj && obj->contains("score")) {
    const json& s = (*obj)["score"];
    if (!s.is_number_integer()) throw ParseError("\"score\" is not an integer");
    check_range(s.get<long long>());
    ScoreComment out{s.get<int>(), {}};
    if (obj->contains("comment") && (*obj)["comment"].is_string())
      out.comment = trim((*obj)["comment"].get<std::string>());
    if (out.comment.empty()) throw ParseError("\"comment\" is missing or empty");
    return out;
  }

  // Lenient: the first standalone integer, then prose.
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(raw[i]))) continue;
    if (i > 0 && (is_word(raw[i - 1]) || raw[i - 1] == '.')) {
      while (i < raw.size() && is_word(raw[i])) ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
    // 3.5 or 3rd are not standalone integers.
    if (j < raw.size() && (std::isalpha(static_cast<unsigned char>(raw[j])) || raw[j] == '_' ||
                           (raw[j] == '.' && j + 1 < raw.size() &&
                            std::isdigit(static_cast<unsigned char>(raw[j + 1]))))) {
      i = j;
      continue;
    }
    const std::string digits(raw.substr(i, j - i));
    const long long score = digits.size() > 6 ? 1000000 : std::stoll(digits);
    check_range(score);
    ScoreComment out{static_cast<int>(score), lenient_comment(raw.substr(j))};
    if (out.comment.empty()) throw ParseError("score has no comment");
    return out;
  }
  throw ParseError("no score found in judge reply");
}

std::string render_dialogue(const Transcript& transcript) {
  std::string out;
  for (const auto& t : transcript.turns) {
    const Role* r = transcript.find_role(t.speaker_id);
    if (!out.empty()) out += '\n';
    out += (r ? r->name : "Speaker " + std::to_string(t.speaker_id)) + ": " + t.sentence;
  }
  return out;
}

namespace {

std::string joined(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (!out.empty()) out += '\n';
    out += l;
  }
  return out;
}

}  // namespace

MetricScore evaluate_metric(const Transcript& transcript, const EvalContext& context,
                            MetricId metric, const Judge& judge) {
  validate(judge.config);
  if (!judge.backend) throw BackendUnavailable("no judge backend configured");
  if (metric == MetricId::CD && !context.original_dialogue)
    throw PreconditionError("CD needs the original dialogue in the context");
  if ((metric == MetricId::VC || metric == MetricId::SC) && !context.perception)
    throw PreconditionError(std::string(to_string(metric)) + " needs perception texts in the context");

  std::map<std::string, std::string> bindings{{"theme", context.theme.text},
                                              {"dialogue", render_dialogue(transcript)}};
  if (context.original_dialogue) bindings["original_dialogue"] = joined(*context.original_dialogue);
  if (context.perception) bindings["perception"] = joined(*context.perception);
  const std::string prompt = render_prompt(judge.config.rubric_templates.at(metric), bindings);

  ChatClient client{judge.backend, judge.config.backend, judge.log, judge.sleeper};
  ChatRequest req;
  req.messages = {ChatMessage{MessageRole::User, prompt}};
  req.temperature = judge.config.temperature;
  req.max_tokens = judge.config.max_tokens;
  req.purpose = "judge." + std::string(to_string(metric));

  std::string reply = client(req);
  ScoreComment sc;
  try {
    sc = parse_score_comment(reply);
  } catch (const ParseError& e) {
    req.messages.push_back(ChatMessage{MessageRole::Assistant, reply});
    req.messages.push_back(ChatMessage{
        MessageRole::User,
        "Your previous reply could not be used: " + std::string(e.what()) +
            "\nReply with a single JSON object {\"score\": <integer 1-5>, \"comment\": \"...\"}."});
    sc = parse_score_comment(client(req));
  }
  return MetricScore{metric, sc.score, sc.comment};
}

EvalReport evaluate_all(const Transcript& transcript, const EvalContext& context,
                        const Judge& judge) {
  EvalReport r;
  r.transcript_ref = transcript.manifest_ref;
  r.theme = transcript.theme;
  for (MetricId m : kAllMetrics) {
    try {
      r.per_metric[m] = evaluate_metric(transcript, context, m, judge);
    } catch (const Error& e) {
      r.failures[m] = std::string(e.kind()) + ": " + e.what();
    }
  }
  if (r.failures.empty()) {
    std::vector<double> scores;
    for (const auto& [m, s] : r.per_metric) scores.push_back(s.score);
    r.average = mean_of(scores);
  }
  return r;
}

// ---- aggregation -----------------------------------------------------------

std::pair<double, double> mean_and_variance(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("no values to aggregate");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, sq / static_cast<double>(values.size())};
}

AggregateResult aggregate_by_theme(std::span<const std::pair<Theme, EvalReport>> reports) {
  if (reports.empty()) throw PreconditionError("no reports to aggregate");
  AggregateResult out;
  for (const auto& [theme, _] : reports)
    if (std::find(out.themes.begin(), out.themes.end(), theme) == out.themes.end())
      out.themes.push_back(theme);

  std::map<MetricId, std::vector<double>> theme_means;
  for (const auto& theme : out.themes) {
    for (MetricId m : kAllMetrics) {
      std::vector<double> values;
      int excluded = 0;
      for (const auto& [t, report] : reports) {
        if (t != theme) continue;
        if (auto it = report.per_metric.find(m); it != report.per_metric.end())
          values.push_back(it->second.score);
        else
          ++excluded;
      }
      if (values.empty()) {
        // Nothing scored: no row, but the exclusions stay visible.
        out.rows.push_back(ThemeAggregate{theme, m, std::nan(""), std::nan(""), 0, excluded});
        continue;
      }
      auto [mean, var] = mean_and_variance(values);
      out.rows.push_back(ThemeAggregate{theme, m, mean, var, static_cast<int>(values.size()), excluded});
      theme_means[m].push_back(mean);
    }
  }
  for (MetricId m : kAllMetrics) {
    auto it = theme_means.find(m);
    if (it == theme_means.end()) continue;
    out.cross_theme.push_back(CrossThemeVariance{m, mean_and_variance(it->second).second,
                                                 static_cast<int>(it->second.size())});
  }
  return out;
}

std::optional<double> theme_average(const AggregateResult& result, const Theme& theme) {
  std::vector<double> means;
  for (const auto& row : result.rows)
    if (row.theme == theme && row.n > 0) means.push_back(row.mean);
  if (means.size() != kAllMetrics.size()) return std::nullopt;
  return mean_of(means);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string metric_header() {
  std::string h;
  for (MetricId m : kAllMetrics) h += "," + std::string(to_string(m));
  return h + ",Average";
}

std::string full_precision(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

std::string aggregate_table_csv(const AggregateResult& result) {
  std::string out = "theme" + metric_header() + "\n";
  for (const auto& theme : result.themes) {
    out += csv_field(theme.text);
    for (MetricId m : kAllMetrics) {
      out += ',';
      for (const auto& row : result.rows)
        if (row.theme == theme && row.metric == m && row.n > 0) out += format_fixed(row.mean);
    }
    out += ',';
    if (auto avg = theme_average(result, theme)) out += format_fixed(*avg);
    out += '\n';
  }
  return out;
}

std::string chart_data_csv(const AggregateResult& result) {
  std::string out = "theme,metric,mean,variance,n,excluded\n";
  for (const auto& row : result.rows) {
    out += csv_field(row.theme.text) + "," + std::string(to_string(row.metric)) + ",";
    if (row.n > 0) out += full_precision(row.mean) + "," + full_precision(row.variance);
    else out += ",";
    out += "," + std::to_string(row.n) + "," + std::to_string(row.excluded) + "\n";
  }
  return out;
}

std::string cross_theme_csv(const AggregateResult& result) {
  std::string out = "metric,variance,themes\n";
  for (const auto& c : result.cross_theme)
    out += std::string(to_string(c.metric)) + "," + full_precision(c.variance) + "," +
           std::to_string(c.themes) + "\n";
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "transcript,theme" + metric_header() + "\n";
  out += csv_field(report.transcript_ref) + "," + csv_field(report.theme.text);
  for (MetricId m : kAllMetrics) {
    out += ',';
    if (auto it = report.per_metric.find(m); it != report.per_metric.end())
      out += std::to_string(it->second.score);
  }
  out += ',';
  if (report.average) out += format_fixed(*report.average);
  return out + "\n";
}

}  // namespace scenedialog
