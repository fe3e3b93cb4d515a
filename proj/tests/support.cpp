#include "support.hpp"

#include <atomic>
#include <sstream>

#include <unistd.h>

#include "scenedialog/ingest.hpp"

#ifndef SCENEDIALOG_FIXTURES
#define SCENEDIALOG_FIXTURES "tests/fixtures"
#endif

namespace testsupport {

fs::path fixture(const std::string& rel) { return fs::path(SCENEDIALOG_FIXTURES) / rel; }

std::shared_ptr<const TemplateStore> prompts() {
  static auto store = std::make_shared<const TemplateStore>(TemplateStore::load_default());
  return store;
}

VideoManifest fixture_manifest() { return load_manifest(fixture("run_a/manifest.json")); }

ScriptedBackends fixture_script(const std::string& dir) { return load_script(fixture(dir)); }

PipelineContext scripted_context(const ScriptedBackends& s, std::shared_ptr<CallLog> log,
                                 PipelineConfig config) {
  auto none = [](double) {};
  BackendConfig bc;
  bc.model_id = "scripted";
  PipelineContext ctx;
  ctx.llm = ChatClient{s.chat, bc, log, none};
  ctx.vision = VisionClient{s.vision, bc, log, none};
  ctx.prompts = prompts();
  ctx.config = config;
  return ctx;
}

std::vector<json> calls_for(const CallLog& log, const std::string& purpose) {
  std::vector<json> out;
  for (const auto& e : log.entries())
    if (e.value("purpose", std::string{}) == purpose) out.push_back(e);
  return out;
}

std::vector<std::string> prompt_texts(const CallLog& log) {
  std::vector<std::string> out;
  for (const auto& e : log.entries()) {
    const json& req = e.at("request");
    if (req.contains("messages"))
      for (const auto& m : req["messages"]) out.push_back(m.at("content").get<std::string>());
    if (req.contains("prompt")) out.push_back(req["prompt"].get<std::string>());
  }
  return out;
}

std::string accept_json() {
  return R"({"theme_contextual": true, "pairwise_continuity": true, "global_coherence": true, "suggestion": ""})";
}

std::string reject_json(const std::string& suggestion) {
  return json{{"theme_contextual", false},
              {"pairwise_continuity", true},
              {"global_coherence", true},
              {"suggestion", suggestion}}
      .dump();
}

std::string plot_roles_json() {
  return json{{"plot", "Two coworkers plan a surprise party."},
              {"roles",
               {{{"character_id", 1}, {"name", "Mia"}, {"description", "planner"}},
                {{"character_id", 2}, {"name", "Ben"}, {"description", "cake duty"}}}}}
      .dump();
}

std::string answer(const std::string& line) { return "PLAN: keep it short.\nANSWER: " + line; }

VideoManifest random_manifest(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  static const std::vector<std::string> words{"we", "should", "go", "now", "later", "maybe",
                                              "the", "train", "is", "late", "again", "ok"};
  VideoManifest m;
  m.video_id = "rand" + std::to_string(pick(0, 99999));
  const int characters = pick(1, 4);
  for (int c = 1; c <= characters; ++c) {
    Character ch{c, "Speaker " + std::to_string(c), std::nullopt};
    if (pick(0, 1)) ch.visual_descriptor = "person " + std::to_string(c);
    m.roster.push_back(ch);
  }
  const int segments = pick(1, 8);
  double t = real(0.0, 1.0);
  for (int i = 0; i < segments; ++i) {
    Segment s;
    s.index = i + 1;
    s.start_s = t;
    s.end_s = t + real(0.5, 5.0);
    s.speaker_id = pick(1, characters);
    const int frames = pick(1, 6);
    for (int f = 0; f < frames; ++f)
      s.frame_refs.push_back("frames/" + m.video_id + "/" + std::to_string(i) + "_" +
                             std::to_string(f) + ".jpg");
    const int n = pick(1, 8);
    for (int w = 0; w < n; ++w)
      s.original_utterance += (w ? " " : "") + words[static_cast<std::size_t>(pick(0, 11))];
    m.segments.push_back(s);
    t = s.end_s + real(0.0, 1.0);
  }
  m.duration_s = t + real(0.1, 2.0);
  m.first_frame_ref = m.segments.front().frame_refs.front();
  m.speaking_rate_wps = real(1.0, 4.0);
  return m;
}

fs::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = fs::temp_directory_path() /
             ("scenedialog-" + tag + "-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace testsupport
