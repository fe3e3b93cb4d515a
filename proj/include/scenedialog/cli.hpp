#pragma once

// Command implementations behind the scenedialog executable: configuration,
// backend wiring, run directories and report files.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scenedialog/backends.hpp"
#include "scenedialog/errors.hpp"
#include "scenedialog/pipeline.hpp"

namespace scenedialog {

namespace fs = std::filesystem;

// Versioned config document, kind "config":
//   {"pipeline": {...},
//    "backends": {"llm": {...}, "vision": {...}, "vision_chat": {...},
//                 "embedding": {...}, "judge": {...}},
//    "judge": {"temperature": 0, "max_tokens": 256}}
// Keys are never stored here; each backend names the variable holding it.
struct AppConfig {
  PipelineConfig pipeline;
  std::optional<BackendConfig> llm, vision, vision_chat, embedding, judge;
  double judge_temperature = 0.0;
  int judge_max_tokens = 256;
};

void to_json(json& j, const AppConfig& v);
void from_json(const json& j, AppConfig& v);
AppConfig load_config(const fs::path& path);

// Every client a command may need. Absent backends are left null.
struct Clients {
  ChatClient llm;
  VisionClient vision;
  ChatClient vision_chat;
  ChatClient judge;
  EmbeddingClient embedding;
};

// Scripted when `script` is set (no network, no sleeping between retries);
// otherwise live HTTP backends, which read their keys immediately.
Clients make_clients(const AppConfig& config, const std::optional<fs::path>& script,
                     std::shared_ptr<CallLog> log);

struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<fs::path> scripted;
  std::optional<fs::path> prompts_dir;
  bool force = false;
};

struct IngestOptions {
  fs::path asr;
  fs::path labels;
  std::optional<fs::path> frames;
  std::optional<fs::path> video;
  std::string frame_tool = "scenedialog-framedump";
  std::optional<std::string> video_id;
  std::optional<double> duration_s;
  std::optional<double> speaking_rate_wps;
  fs::path out;
  bool force = false;
};

struct GenerateOptions : CommonOptions {
  fs::path manifest;
  std::vector<std::string> themes;
  std::string method = "pipeline";  // pipeline | text | image
  fs::path out_dir;
  int jobs = 1;
};

struct EvaluateOptions : CommonOptions {
  fs::path input;  // run directory or transcript file
  std::optional<fs::path> context;
  std::optional<fs::path> out;
};

struct PredictOptions : CommonOptions {
  fs::path manifest;
  int k = 1;
  std::string method = "pipeline";  // pipeline | text
  std::string theme = "continue the conversation as it is going";
  fs::path out_dir;
};

struct ReportOptions {
  std::vector<fs::path> inputs;
  bool by_theme = false;
  fs::path out_dir;
  bool force = false;
};

// Each returns the process exit code or throws Error.
ExitCode cmd_ingest(const IngestOptions& o, std::ostream& out);
ExitCode cmd_generate(const GenerateOptions& o, std::ostream& out);
ExitCode cmd_evaluate(const EvaluateOptions& o, std::ostream& out);
ExitCode cmd_predict_last_k(const PredictOptions& o, std::ostream& out);
ExitCode cmd_report(const ReportOptions& o, std::ostream& out);

// Run directory for theme `index` of `count` ("theme-<n>-<slug>" when count > 1).
fs::path run_dir_for(const fs::path& out_dir, std::size_t index, std::size_t count,
                     const std::string& theme);

// {"error": {"kind", "message", "exit_code"}}
json error_json(const Error& e);

// Parses argv (without the program name) and dispatches. Errors are written
// to `err` as error JSON.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenedialog
