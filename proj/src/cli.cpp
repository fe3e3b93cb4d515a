#include "scenedialog/cli.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "scenedialog/baselines.hpp"
#include "scenedialog/evaluation.hpp"
#include "scenedialog/http_backend.hpp"
#include "scenedialog/ingest.hpp"
#include "scenedialog/metrics.hpp"
#include "scenedialog/scripted.hpp"
#include "scenedialog/text.hpp"

extern char** environ;

namespace scenedialog {

// ---- config ----------------------------------------------------------------

void to_json(json& j, const AppConfig& v) {
  json backends = json::object();
  auto put = [&](const char* name, const std::optional<BackendConfig>& b) {
    if (b) backends[name] = *b;
  };
  put("llm", v.llm);
  put("vision", v.vision);
  put("vision_chat", v.vision_chat);
  put("embedding", v.embedding);
  put("judge", v.judge);
  j = json{{"pipeline", v.pipeline},
           {"backends", backends},
           {"judge", {{"temperature", v.judge_temperature}, {"max_tokens", v.judge_max_tokens}}}};
}

void from_json(const json& j, AppConfig& v) {
  v = AppConfig{};
  if (j.contains("pipeline")) v.pipeline = j["pipeline"].get<PipelineConfig>();
  const json backends = j.value("backends", json::object());
  auto get = [&](const char* name, std::optional<BackendConfig>& b) {
    if (backends.contains(name)) b = backends[name].get<BackendConfig>();
  };
  get("llm", v.llm);
  get("vision", v.vision);
  get("vision_chat", v.vision_chat);
  get("embedding", v.embedding);
  get("judge", v.judge);
  const json judge = j.value("judge", json::object());
  v.judge_temperature = judge.value("temperature", 0.0);
  v.judge_max_tokens = judge.value("max_tokens", 256);
}

AppConfig load_config(const fs::path& path) {
  auto config = decode_document<AppConfig>(read_json_file(path), "config");
  validate(config.pipeline);
  for (const auto* b : {&config.llm, &config.vision, &config.vision_chat, &config.embedding,
                        &config.judge})
    if (*b) validate(**b);
  if (config.judge_temperature != 0.0) throw ValidationError("judge temperature must be 0");
  return config;
}

// ---- backends --------------------------------------------------------------

namespace {

BackendConfig scripted_config(const std::optional<BackendConfig>& configured) {
  BackendConfig c = configured.value_or(BackendConfig{});
  if (c.model_id.empty()) c.model_id = "scripted";
  return c;
}

void no_sleep(double) {}

}  // namespace

Clients make_clients(const AppConfig& config, const std::optional<fs::path>& script,
                     std::shared_ptr<CallLog> log) {
  Clients c;
  if (script) {
    auto s = load_script(*script);
    c.llm = ChatClient{s.chat, scripted_config(config.llm), log, no_sleep};
    c.vision = VisionClient{s.vision, scripted_config(config.vision), log, no_sleep};
    c.vision_chat = ChatClient{s.vision_chat, scripted_config(config.vision_chat), log, no_sleep};
    c.judge = ChatClient{s.judge, scripted_config(config.judge), log, no_sleep};
    c.embedding = EmbeddingClient{s.embedding, scripted_config(config.embedding), log, no_sleep};
    return c;
  }
  if (config.llm) c.llm = ChatClient{std::make_shared<HttpChatBackend>(*config.llm, false), *config.llm, log};
  if (config.vision) {
    c.vision = VisionClient{std::make_shared<HttpChatBackend>(*config.vision, true), *config.vision, log};
  }
  if (config.vision_chat)
    c.vision_chat = ChatClient{std::make_shared<HttpChatBackend>(*config.vision_chat, true),
                               *config.vision_chat, log};
  if (config.judge)
    c.judge = ChatClient{std::make_shared<HttpChatBackend>(*config.judge, false), *config.judge, log};
  if (config.embedding)
    c.embedding = EmbeddingClient{std::make_shared<HttpEmbeddingBackend>(*config.embedding),
                                  *config.embedding, log};
  return c;
}

// ---- helpers ---------------------------------------------------------------

json error_json(const Error& e) {
  return json{{"error",
               {{"kind", e.kind()}, {"message", e.what()}, {"exit_code", static_cast<int>(e.exit_code())}}}};
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << content;
  if (!f) throw IoError("failed writing " + path.string());
}

bool non_empty_dir(const fs::path& p) {
  std::error_code ec;
  return fs::is_directory(p, ec) && !fs::is_empty(p, ec);
}

// Creates `dir`, refusing to reuse a non-empty one unless forced.
void prepare_out_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_directory(dir, ec))
    throw UsageError(dir.string() + " exists and is not a directory");
  if (non_empty_dir(dir) && !force)
    throw UsageError(dir.string() + " is not empty; pass --force to overwrite");
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

AppConfig resolve_config(const CommonOptions& o) {
  if (o.config) return load_config(*o.config);
  if (!o.scripted) throw UsageError("live mode needs --config (or pass --scripted for an offline run)");
  return AppConfig{};
}

std::shared_ptr<const TemplateStore> load_prompts(const CommonOptions& o) {
  return std::make_shared<const TemplateStore>(
      o.prompts_dir ? TemplateStore::load_dir(*o.prompts_dir) : TemplateStore::load_default());
}

json config_snapshot(const AppConfig& config, const CommonOptions& o, json extra) {
  json snap{{"config", config},
            {"mode", o.scripted ? "scripted" : "live"},
            {"prompts_dir", o.prompts_dir ? o.prompts_dir->string() : std::string("(built-in)")}};
  for (auto& [k, v] : extra.items()) snap[k] = v;
  return to_document("config_snapshot", snap);
}

ExitCode exit_code_for_kind(std::string_view kind) {
  static const std::map<std::string_view, ExitCode> table{
      {"UsageError", ExitCode::Usage},          {"PreconditionError", ExitCode::Usage},
      {"ParseError", ExitCode::Parse},          {"EmptyGeneration", ExitCode::Parse},
      {"TransportError", ExitCode::Backend},    {"AuthError", ExitCode::Backend},
      {"MalformedResponseError", ExitCode::Backend}, {"FrameNotFound", ExitCode::Backend},
      {"BackendUnavailable", ExitCode::Backend}, {"ScriptExhausted", ExitCode::Backend},
      {"ToolNotFound", ExitCode::Backend}};
  auto it = table.find(kind);
  return it == table.end() ? ExitCode::Validation : it->second;
}

std::string slug(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(c));
    else if (!out.empty() && out.back() != '-') out += '-';
    if (out.size() >= 40) break;
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "theme" : out;
}

std::optional<fs::path> find_on_path(const std::string& tool) {
  if (tool.find('/') != std::string::npos) {
    if (::access(tool.c_str(), X_OK) == 0) return fs::path(tool);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::stringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) dir = ".";
    fs::path candidate = fs::path(dir) / tool;
    if (::access(candidate.c_str(), X_OK) == 0 && !fs::is_directory(candidate)) return candidate;
  }
  return std::nullopt;
}

void run_tool(const fs::path& tool, const std::vector<std::string>& args) {
  std::vector<std::string> argv_s{tool.string()};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawn(&pid, tool.c_str(), nullptr, nullptr, argv.data(), environ) != 0)
    throw IoError("cannot start " + tool.string());
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) throw IoError("lost track of " + tool.string());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw IoError(tool.string() + " failed with status " + std::to_string(WEXITSTATUS(status)));
}

}  // namespace

fs::path run_dir_for(const fs::path& out_dir, std::size_t index, std::size_t count,
                     const std::string& theme) {
  if (count <= 1) return out_dir;
  return out_dir / ("theme-" + std::to_string(index + 1) + "-" + slug(theme));
}

// ---- ingest ----------------------------------------------------------------

ExitCode cmd_ingest(const IngestOptions& o, std::ostream& out) {
  std::error_code ec;
  if (fs::exists(o.out, ec) && !o.force)
    throw UsageError(o.out.string() + " exists; pass --force to overwrite");
  if (o.frames && o.video) throw UsageError("give either --frames or --video, not both");
  if (!o.frames && !o.video) throw UsageError("one of --frames or --video is required");

  const auto asr = parse_asr(read_json_file(o.asr));
  const auto labels = parse_speaker_labels(read_json_file(o.labels));
  const std::string video_id =
      o.video_id.value_or(o.video ? o.video->stem().string() : o.asr.stem().string());

  fs::path frame_dir;
  if (o.video) {
    auto tool = find_on_path(o.frame_tool);
    if (!tool)
      throw ToolNotFound("frame-dump tool '" + o.frame_tool + "' not found on PATH");
    if (!fs::exists(*o.video)) throw IoError("video not found: " + o.video->string());
    frame_dir = fs::absolute(o.out).parent_path() / "frames" / video_id;
    fs::create_directories(frame_dir, ec);
    // Contract: <tool> <video> <out_dir> writes <ms_timestamp>.jpg files.
    run_tool(*tool, {fs::absolute(*o.video).string(), frame_dir.string()});
  } else {
    frame_dir = fs::absolute(*o.frames);
  }

  double duration = 0.0;
  for (const auto& s : asr) duration = std::max(duration, s.end_s);
  if (o.duration_s) duration = *o.duration_s;
  VideoManifest m = build_manifest(asr, labels, frame_dir, video_id, duration);
  if (o.speaking_rate_wps) {
    m.speaking_rate_wps = *o.speaking_rate_wps;
    require_valid(m);
  }
  if (!o.out.parent_path().empty()) fs::create_directories(o.out.parent_path(), ec);
  write_file(o.out, dump(manifest_document(m)));
  const auto stats = manifest_stats(m);
  out << dump(json{{"manifest", o.out.string()},
                   {"video_id", m.video_id},
                   {"roles", stats.roles},
                   {"turns", stats.turns},
                   {"duration_s", stats.duration_s}});
  return ExitCode::Ok;
}

// ---- generate --------------------------------------------------------------

namespace {

struct RunOutcome {
  fs::path dir;
  ExitCode code = ExitCode::Ok;
  std::optional<json> error;
};

RunOutcome generate_one(const GenerateOptions& o, const AppConfig& config,
                        const std::shared_ptr<const TemplateStore>& prompts,
                        const VideoManifest& manifest, const Theme& theme, const fs::path& dir) {
  RunOutcome r{dir, ExitCode::Ok, std::nullopt};
  auto log = std::make_shared<CallLog>();
  for (const char* stale : {"partial.json", "error.json"}) fs::remove(dir / stale);
  write_file(dir / "config.snapshot",
             dump(config_snapshot(config, o, json{{"method", o.method}, {"theme", theme.text},
                                                  {"manifest", o.manifest.string()}})));
  auto flush_log = [&] { write_file(dir / "calls.log.jsonl", log->to_jsonl()); };
  json metadata{{"method", o.method}, {"theme", theme.text}, {"video_id", manifest.video_id}};
  try {
    Clients clients = make_clients(config, o.scripted, log);
    PipelineConfig pc = config.pipeline;
    pc.speaking_rate_wps = manifest.speaking_rate_wps;
    PipelineContext ctx{clients.llm, clients.vision, prompts, pc, {}};
    if (!ctx.llm) throw BackendUnavailable("no chat backend configured (backends.llm)");
    if (!ctx.vision) throw BackendUnavailable("no vision backend configured (backends.vision)");

    Transcript t;
    if (o.method == "pipeline") t = run_dialogue(manifest, theme, ctx);
    else if (o.method == "text") t = run_text_baseline(manifest, theme, ctx);
    else t = run_image_baseline(manifest, theme, ctx, clients.vision_chat);

    write_file(dir / "transcript.json", dump(to_document("transcript", t)));
    write_file(dir / "context.json", dump(to_document("eval_context", make_eval_context(manifest, t))));
    metadata["status"] = "ok";
    metadata["turns"] = t.turns.size();
  } catch (const Error& e) {
    r.code = e.exit_code();
    r.error = error_json(e);
    metadata["status"] = "failed";
    if (const auto* aborted = dynamic_cast<const RunAborted*>(&e))
      write_file(dir / "partial.json", dump(to_document("partial_run", aborted->partial())));
    write_file(dir / "error.json", dump(*r.error));
  }
  flush_log();
  write_file(dir / "metadata.json", dump(metadata));
  return r;
}

}  // namespace

ExitCode cmd_generate(const GenerateOptions& o, std::ostream& out) {
  if (o.themes.empty()) throw UsageError("at least one --theme is required");
  if (o.method != "pipeline" && o.method != "text" && o.method != "image")
    throw UsageError("unknown method '" + o.method + "' (pipeline|text|image)");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  const AppConfig config = resolve_config(o);
  const auto prompts = load_prompts(o);
  const VideoManifest manifest = load_manifest(o.manifest);

  std::vector<Theme> themes;
  for (const auto& t : o.themes) themes.push_back(make_theme(t));
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < themes.size(); ++i) {
    dirs.push_back(run_dir_for(o.out_dir, i, themes.size(), themes[i].text));
    prepare_out_dir(dirs.back(), o.force);
  }

  std::vector<RunOutcome> outcomes(themes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < themes.size(); i = next++)
      outcomes[i] = generate_one(o, config, prompts, manifest, themes[i], dirs[i]);
  };
  const int n = std::min<int>(o.jobs, static_cast<int>(themes.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExitCode code = ExitCode::Ok;
  json summary = json::array();
  for (const auto& r : outcomes) {
    json entry{{"run_dir", r.dir.string()}, {"exit_code", static_cast<int>(r.code)}};
    if (r.error) entry["error"] = (*r.error)["error"];
    summary.push_back(entry);
    if (code == ExitCode::Ok) code = r.code;
  }
  out << dump(json{{"runs", summary}});
  return code;
}

// ---- evaluate --------------------------------------------------------------

ExitCode cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  std::error_code ec;
  fs::path transcript_path = o.input;
  fs::path base = o.input.parent_path();
  if (fs::is_directory(o.input, ec)) {
    transcript_path = o.input / "transcript.json";
    base = o.input;
  }
  if (!fs::exists(transcript_path, ec))
    throw IoError("no transcript at " + transcript_path.string());
  const Transcript transcript = decode_document<Transcript>(read_json_file(transcript_path), "transcript");

  EvalContext context{transcript.theme, std::nullopt, std::nullopt};
  const fs::path context_path = o.context.value_or(base / "context.json");
  if (fs::exists(context_path, ec)) {
    context = decode_document<EvalContext>(read_json_file(context_path), "eval_context");
  } else if (o.context) {
    throw IoError("context file not found: " + o.context->string());
  } else {
    spdlog::warn("no context.json next to the transcript; CD, VC and SC will fail");
  }

  const fs::path out_dir = o.out.value_or(base);
  if (fs::exists(out_dir / "eval.json", ec) && !o.force)
    throw UsageError((out_dir / "eval.json").string() + " exists; pass --force to overwrite");
  fs::create_directories(out_dir, ec);

  const AppConfig config = resolve_config(o);
  const auto prompts = load_prompts(o);
  auto log = std::make_shared<CallLog>();
  Clients clients = make_clients(config, o.scripted, log);
  if (!clients.judge) throw BackendUnavailable("no judge backend configured (backends.judge)");

  Judge judge{clients.judge.backend,
              make_judge_config(*prompts, clients.judge.config),
              log,
              clients.judge.sleeper};
  judge.config.temperature = config.judge_temperature;
  judge.config.max_tokens = config.judge_max_tokens;

  EvalReport report = evaluate_all(transcript, context, judge);
  write_file(out_dir / "eval.json", dump(to_document("eval_report", report)));
  write_file(out_dir / "report.csv", report_csv(report));
  write_file(out_dir / "judge.calls.log.jsonl", log->to_jsonl());

  out << dump(json{{"eval", (out_dir / "eval.json").string()},
                   {"scored", report.per_metric.size()},
                   {"failed", report.failures.size()},
                   {"average", report.average ? json(*report.average) : json(nullptr)}});
  if (!report.per_metric.empty()) return ExitCode::Ok;
  const std::string& reason = report.failures.begin()->second;
  return exit_code_for_kind(reason.substr(0, reason.find(':')));
}

// ---- predict-last-k --------------------------------------------------------

ExitCode cmd_predict_last_k(const PredictOptions& o, std::ostream& out) {
  const PredictionMethod method = prediction_method_from_string(o.method);
  const VideoManifest manifest = load_manifest(o.manifest);
  const int total = static_cast<int>(manifest.segments.size());
  if (o.k < 1 || o.k >= total)
    throw UsageError("--k must satisfy 1 <= k < " + std::to_string(total));
  const AppConfig config = resolve_config(o);
  const auto prompts = load_prompts(o);
  prepare_out_dir(o.out_dir, o.force);

  auto log = std::make_shared<CallLog>();
  write_file(o.out_dir / "config.snapshot",
             dump(config_snapshot(config, o, json{{"method", o.method}, {"k", o.k},
                                                  {"theme", o.theme},
                                                  {"manifest", o.manifest.string()}})));
  try {
    Clients clients = make_clients(config, o.scripted, log);
    PipelineConfig pc = config.pipeline;
    pc.speaking_rate_wps = manifest.speaking_rate_wps;
    PipelineContext ctx{clients.llm, clients.vision, prompts, pc, {}};
    if (!ctx.llm) throw BackendUnavailable("no chat backend configured (backends.llm)");
    if (!ctx.vision) throw BackendUnavailable("no vision backend configured (backends.vision)");

    auto result = last_k_prediction(manifest, o.k, method, make_theme(o.theme), ctx);
    auto scores = score_predictions(result, clients.embedding);

    json items = json::array();
    std::vector<double> rouge, met, bert;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& s = scores[i];
      items.push_back({{"segment_index", result.segment_indices[i]},
                       {"speaker_id", result.speakers[i]},
                       {"prediction", result.predictions[i]},
                       {"reference", result.references[i]},
                       {"rouge_l", s.rouge_l},
                       {"meteor", s.meteor},
                       {"bert_score", s.bert_score ? json(*s.bert_score) : json("unavailable")}});
      rouge.push_back(s.rouge_l);
      met.push_back(s.meteor);
      if (s.bert_score) bert.push_back(*s.bert_score);
    }
    json means{{"rouge_l", *mean_of(rouge)}, {"meteor", *mean_of(met)}};
    means["bert_score"] = bert.size() == scores.size() ? json(*mean_of(bert)) : json("unavailable");
    json doc = to_document("last_k_predictions",
                           json{{"video_id", manifest.video_id}, {"k", o.k}, {"method", o.method},
                                {"theme", o.theme}, {"items", items}, {"means", means}});
    write_file(o.out_dir / "predictions.json", dump(doc));
    write_file(o.out_dir / "calls.log.jsonl", log->to_jsonl());
    out << dump(json{{"predictions", (o.out_dir / "predictions.json").string()}, {"means", means}});
  } catch (const Error& e) {
    write_file(o.out_dir / "calls.log.jsonl", log->to_jsonl());
    write_file(o.out_dir / "error.json", dump(error_json(e)));
    throw;
  }
  return ExitCode::Ok;
}

// ---- report ----------------------------------------------------------------

ExitCode cmd_report(const ReportOptions& o, std::ostream& out) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& in : o.inputs) {
    if (fs::is_regular_file(in, ec)) {
      files.push_back(in);
    } else if (fs::is_directory(in, ec)) {
      if (fs::exists(in / "eval.json")) {
        files.push_back(in / "eval.json");
        continue;
      }
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_directory() && fs::exists(e.path() / "eval.json")) found.push_back(e.path() / "eval.json");
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      throw IoError("no such input: " + in.string());
    }
  }
  if (files.empty()) throw UsageError("no eval.json reports found in the inputs");

  std::vector<std::pair<Theme, EvalReport>> reports;
  const Theme all = make_theme("all");
  for (const auto& f : files) {
    auto r = decode_document<EvalReport>(read_json_file(f), "eval_report");
    reports.emplace_back(o.by_theme ? r.theme : all, std::move(r));
  }
  const AggregateResult agg = aggregate_by_theme(reports);

  prepare_out_dir(o.out_dir, o.force);
  write_file(o.out_dir / "aggregate.csv", aggregate_table_csv(agg));
  write_file(o.out_dir / "chart_data.csv", chart_data_csv(agg));
  write_file(o.out_dir / "cross_theme.csv", cross_theme_csv(agg));

  json rows = json::array();
  for (const auto& r : agg.rows) {
    json row{{"theme", r.theme.text}, {"metric", to_string(r.metric)}, {"n", r.n},
             {"excluded", r.excluded}};
    row["mean"] = r.n > 0 ? json(r.mean) : json(nullptr);
    row["variance"] = r.n > 0 ? json(r.variance) : json(nullptr);
    rows.push_back(row);
  }
  json cross = json::array();
  for (const auto& c : agg.cross_theme)
    cross.push_back({{"metric", to_string(c.metric)}, {"variance", c.variance}, {"themes", c.themes}});
  write_file(o.out_dir / "aggregate.json",
             dump(to_document("aggregate", json{{"reports", files.size()}, {"rows", rows},
                                                {"cross_theme", cross}})));
  out << dump(json{{"reports", files.size()}, {"themes", agg.themes.size()},
                   {"out_dir", o.out_dir.string()}});
  return ExitCode::Ok;
}

// ---- argv ------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Theme-aware dialogue generation and evaluation for video clips", "scenedialog"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  auto add_common = [](CLI::App* sub, CommonOptions& c) {
    sub->add_option("--config", c.config, "Config document (kind \"config\")");
    sub->add_option("--scripted", c.scripted, "Script document or directory for an offline run");
    sub->add_option("--prompts", c.prompts_dir, "Prompt template directory");
    sub->add_flag("--force", c.force, "Overwrite existing outputs");
  };

  IngestOptions ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Build a validated manifest");
  s_ingest->add_option("--asr", ingest.asr, "ASR segments JSON")->required();
  s_ingest->add_option("--labels", ingest.labels, "Speaker labels JSON")->required();
  s_ingest->add_option("--frames", ingest.frames, "Directory of <ms>.jpg frames");
  s_ingest->add_option("--video", ingest.video, "Video file, dumped with the frame tool");
  s_ingest->add_option("--frame-tool", ingest.frame_tool, "Frame-dump executable")->capture_default_str();
  s_ingest->add_option("--video-id", ingest.video_id);
  s_ingest->add_option("--duration", ingest.duration_s, "Video duration in seconds");
  s_ingest->add_option("--speaking-rate", ingest.speaking_rate_wps, "Words per second");
  s_ingest->add_option("--out", ingest.out, "Manifest path")->required();
  s_ingest->add_flag("--force", ingest.force);

  GenerateOptions gen;
  auto* s_gen = app.add_subcommand("generate", "Write new dialogue for a manifest");
  s_gen->add_option("manifest", gen.manifest)->required();
  s_gen->add_option("--theme", gen.themes, "Theme (repeat for a batch)")->required();
  s_gen->add_option("--method", gen.method, "pipeline|text|image")->capture_default_str();
  s_gen->add_option("--out-dir", gen.out_dir)->required();
  s_gen->add_option("--jobs", gen.jobs)->capture_default_str();
  add_common(s_gen, gen);

  EvaluateOptions ev;
  auto* s_eval = app.add_subcommand("evaluate", "Score a transcript on the six judge metrics");
  s_eval->add_option("input", ev.input, "Run directory or transcript.json")->required();
  s_eval->add_option("--context", ev.context);
  s_eval->add_option("--out", ev.out);
  add_common(s_eval, ev);

  PredictOptions pk;
  auto* s_pk = app.add_subcommand("predict-last-k", "Predict the final k original lines");
  s_pk->add_option("manifest", pk.manifest)->required();
  s_pk->add_option("--k", pk.k)->required();
  s_pk->add_option("--method", pk.method, "pipeline|text")->capture_default_str();
  s_pk->add_option("--theme", pk.theme)->capture_default_str();
  s_pk->add_option("--out-dir", pk.out_dir)->required();
  add_common(s_pk, pk);

  ReportOptions rep;
  auto* s_rep = app.add_subcommand("report", "Aggregate eval reports");
  s_rep->add_option("inputs", rep.inputs, "Eval directories or eval.json files");
  s_rep->add_flag("--by-theme", rep.by_theme);
  s_rep->add_option("--out", rep.out_dir)->required();
  s_rep->add_flag("--force", rep.force);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << dump(error_json(UsageError(e.what())));
    return static_cast<int>(ExitCode::Usage);
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    ExitCode code = ExitCode::Ok;
    if (*s_ingest) code = cmd_ingest(ingest, out);
    else if (*s_gen) code = cmd_generate(gen, out);
    else if (*s_eval) code = cmd_evaluate(ev, out);
    else if (*s_pk) code = cmd_predict_last_k(pk, out);
    else if (*s_rep) code = cmd_report(rep, out);
    return static_cast<int>(code);
  } catch (const Error& e) {
    err << dump(error_json(e));
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    err << dump(json{{"error", {{"kind", "InternalError"}, {"message", e.what()}, {"exit_code", 1}}}});
    return static_cast<int>(ExitCode::Failure);
  }
}

}  // namespace scenedialog
