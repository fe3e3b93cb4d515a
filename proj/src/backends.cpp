#include "scenedialog/backends.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "scenedialog/errors.hpp"
#include "scenedialog/text.hpp"

#ifndef SCENEDIALOG_PROMPTS_DIR
#define SCENEDIALOG_PROMPTS_DIR "prompts"
#endif

namespace scenedialog {

std::string_view to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

void validate(const ChatRequest& r) {
  if (r.messages.empty()) throw PreconditionError("chat request has no messages");
  if (!std::isfinite(r.temperature) || r.temperature < 0.0)
    throw PreconditionError("chat temperature must be finite and >= 0");
  if (r.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

void validate(const VisionRequest& r) {
  if (r.frame_refs.empty()) throw PreconditionError("vision request has no frames");
}

void validate(const BackendConfig& c) {
  if (c.max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (!(c.timeout_s > 0.0)) throw ValidationError("timeout_s must be positive");
  if (c.retry_backoff_s < 0.0) throw ValidationError("retry_backoff_s must be >= 0");
}

void to_json(json& j, const ChatRequest& v) {
  json messages = json::array();
  for (const auto& m : v.messages)
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  j = json{{"messages", messages},
           {"temperature", v.temperature},
           {"max_tokens", v.max_tokens},
           {"model_id", v.model_id},
           {"purpose", v.purpose}};
  if (!v.attachments.empty()) j["attachments"] = v.attachments;
}

void to_json(json& j, const VisionRequest& v) {
  j = json{{"frame_refs", v.frame_refs},
           {"prompt", v.prompt},
           {"model_id", v.model_id},
           {"kind", v.kind}};
}

void to_json(json& j, const BackendConfig& v) {
  j = json{{"endpoint_url", v.endpoint_url},   {"api_key_env_var", v.api_key_env_var},
           {"model_id", v.model_id},           {"timeout_s", v.timeout_s},
           {"max_retries", v.max_retries},     {"retry_backoff_s", v.retry_backoff_s}};
}

void from_json(const json& j, BackendConfig& v) {
  BackendConfig d;
  v.endpoint_url = j.value("endpoint_url", d.endpoint_url);
  v.api_key_env_var = j.value("api_key_env_var", d.api_key_env_var);
  v.model_id = j.value("model_id", d.model_id);
  v.timeout_s = j.value("timeout_s", d.timeout_s);
  v.max_retries = j.value("max_retries", d.max_retries);
  v.retry_backoff_s = j.value("retry_backoff_s", d.retry_backoff_s);
}

// ---- call log --------------------------------------------------------------

void CallLog::append(json entry) {
  std::lock_guard lock(mutex_);
  entry["seq"] = entries_.size();
  entries_.push_back(std::move(entry));
}

std::vector<json> CallLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string CallLog::to_jsonl() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& e : entries_) {
    out += e.dump();
    out += '\n';
  }
  return out;
}

void sleep_seconds(double seconds) {
  if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

namespace {

json error_json(const Error& e) { return json{{"kind", e.kind()}, {"message", e.what()}}; }

// Runs `attempt` under the retry policy, logging each try as
// {channel, purpose, attempt, request, response|error}.
template <typename Fn>
auto with_retries(const BackendConfig& config, const char* channel, const std::string& purpose,
                  const json& request_json, CallLog* log, const Sleeper& sleeper, Fn&& attempt) {
  validate(config);
  for (int n = 0;; ++n) {
    json entry{{"channel", channel}, {"purpose", purpose}, {"attempt", n + 1},
               {"request", request_json}};
    try {
      auto result = attempt();
      if (log) {
        entry["response"] = result;
        log->append(std::move(entry));
      }
      return result;
    } catch (const TransportError& e) {
      if (log) {
        entry["error"] = error_json(e);
        log->append(std::move(entry));
      }
      if (n >= config.max_retries)
        throw TransportError(std::string(channel) + " failed after " + std::to_string(n + 1) +
                             " attempt(s): " + e.what());
      if (sleeper) sleeper(config.retry_backoff_s * std::pow(2.0, n));
    } catch (const Error& e) {
      if (log) {
        entry["error"] = error_json(e);
        log->append(std::move(entry));
      }
      throw;
    }
  }
}

}  // namespace

std::string chat(ChatBackend& backend, const BackendConfig& config, ChatRequest request,
                 CallLog* log, const Sleeper& sleeper) {
  if (request.model_id.empty()) request.model_id = config.model_id;
  validate(request);
  return with_retries(config, "chat", request.purpose, json(request), log, sleeper,
                      [&] { return backend.complete(request); });
}

std::string perceive(VisionBackend& backend, const BackendConfig& config, VisionRequest request,
                     CallLog* log, const Sleeper& sleeper) {
  if (request.model_id.empty()) request.model_id = config.model_id;
  validate(request);
  return with_retries(config, "vision", "vision." + request.kind, json(request), log, sleeper,
                      [&] { return backend.describe(request); });
}

TokenEmbeddings embed(EmbeddingBackend* backend, const BackendConfig& config,
                      const EmbeddingRequest& request, CallLog* log, const Sleeper& sleeper) {
  if (backend == nullptr) throw BackendUnavailable("no embedding backend configured");
  const auto tokens = tokenize(request.text);
  if (tokens.empty()) throw PreconditionError("embedding input has no tokens");
  const std::string model = request.model_id.empty() ? config.model_id : request.model_id;
  json req{{"tokens", tokens}, {"model_id", model}};
  auto vectors = with_retries(config, "embed", "embed", req, nullptr, sleeper,
                              [&] { return backend->embed_tokens(tokens, model); });
  if (vectors.size() != tokens.size())
    throw MalformedResponseError("embedding backend returned " + std::to_string(vectors.size()) +
                                 " vectors for " + std::to_string(tokens.size()) + " tokens");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.empty() || v.size() != dim)
      throw MalformedResponseError("embedding vectors have inconsistent dimension");
  // Vectors are bulky; the log keeps the request and shape only.
  if (log)
    log->append(json{{"channel", "embed"}, {"purpose", "embed"}, {"attempt", 1},
                     {"request", req}, {"response", {{"count", vectors.size()}, {"dim", dim}}}});
  return vectors;
}

// ---- templates -------------------------------------------------------------

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls on_text(text) for literal runs and on_name(name) for each {name}.
template <typename TextFn, typename NameFn>
void scan_template(std::string_view body, TextFn&& on_text, NameFn&& on_name) {
  std::size_t i = 0, literal_start = 0;
  while (i < body.size()) {
    if (body[i] == '{' && i + 1 < body.size() && is_ident_start(body[i + 1])) {
      std::size_t j = i + 1;
      while (j < body.size() && is_ident(body[j])) ++j;
      if (j < body.size() && body[j] == '}') {
        on_text(body.substr(literal_start, i - literal_start));
        on_name(std::string(body.substr(i + 1, j - i - 1)));
        i = j + 1;
        literal_start = i;
        continue;
      }
    }
    ++i;
  }
  on_text(body.substr(literal_start));
}

}  // namespace

std::vector<std::string> placeholders_in(std::string_view body) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  scan_template(body, [](std::string_view) {}, [&](std::string name) {
    if (seen.insert(name).second) names.push_back(std::move(name));
  });
  return names;
}

PromptTemplate make_template(std::string template_id, std::string body) {
  PromptTemplate t{std::move(template_id), std::move(body), {}};
  for (auto& name : placeholders_in(t.body)) t.required_placeholders.insert(std::move(name));
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings) {
  for (const auto& name : placeholders_in(tmpl.body))
    if (tmpl.required_placeholders.count(name) && !bindings.count(name))
      throw MissingBinding(name);
  for (const auto& name : tmpl.required_placeholders)
    if (!bindings.count(name)) throw MissingBinding(name);

  std::string out;
  out.reserve(tmpl.body.size());
  scan_template(tmpl.body, [&](std::string_view text) { out += text; },
                [&](const std::string& name) {
                  auto it = bindings.find(name);
                  if (it != bindings.end()) {
                    out += it->second;
                  } else {
                    out += '{';
                    out += name;
                    out += '}';
                  }
                });
  return out;
}

TemplateStore TemplateStore::load_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("prompt directory not found: " + dir.string());
  TemplateStore store;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    std::string text = body.str();
    // Drop the final newline so templates compose without trailing blank lines.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    store.add(make_template(entry.path().stem().string(), std::move(text)));
  }
  return store;
}

std::filesystem::path TemplateStore::default_dir() {
  if (const char* env = std::getenv("SCENEDIALOG_PROMPTS_DIR"); env && *env) return env;
  return SCENEDIALOG_PROMPTS_DIR;
}

TemplateStore TemplateStore::load_default() { return load_dir(default_dir()); }

void TemplateStore::add(PromptTemplate tmpl) {
  auto id = tmpl.template_id;
  templates_[id] = std::move(tmpl);
}

bool TemplateStore::contains(const std::string& id) const { return templates_.count(id) > 0; }

const PromptTemplate& TemplateStore::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw IoError("prompt template '" + id + "' not found");
  return it->second;
}

std::string TemplateStore::render(const std::string& id,
                                  const std::map<std::string, std::string>& bindings) const {
  return render_prompt(get(id), bindings);
}

}  // namespace scenedialog
