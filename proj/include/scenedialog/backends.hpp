#pragma once

// Model-client contracts (text LLM, vision-language model, embeddings), the
// retrying call wrappers every stage goes through, the call log, and prompt
// templating.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scenedialog {

using json = nlohmann::json;

enum class MessageRole { System, User, Assistant };

struct ChatMessage {
  MessageRole role = MessageRole::User;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 512;
  std::string model_id;
  // Call-site tag ("stage2.predict", "judge.TR", ...); routes scripted
  // responses and labels call-log lines. Not sent over the wire.
  std::string purpose;
  // Image frame refs attached to the last user message (vision-chat only).
  std::vector<std::string> attachments;
};

struct VisionRequest {
  std::vector<std::string> frame_refs;
  std::string prompt;
  std::string model_id;
  std::string kind;  // prompt granularity: "scene", "behavior", "emotion"
};

struct EmbeddingRequest {
  std::string text;
  std::string model_id;
};

// Per-token vectors, all of one dimension.
using TokenEmbeddings = std::vector<std::vector<double>>;

struct BackendConfig {
  std::string endpoint_url;
  std::string api_key_env_var;
  std::string model_id;
  double timeout_s = 60.0;
  int max_retries = 2;
  double retry_backoff_s = 1.0;
  bool operator==(const BackendConfig&) const = default;
};

void validate(const ChatRequest& request);
void validate(const VisionRequest& request);
void validate(const BackendConfig& config);

void to_json(json& j, const ChatRequest& v);
void to_json(json& j, const VisionRequest& v);
void to_json(json& j, const BackendConfig& v);
void from_json(const json& j, BackendConfig& v);
std::string_view to_string(MessageRole role);

// ---- backend interfaces ----------------------------------------------------

// Implementations throw TransportError for transient failures (the wrappers
// below retry those), AuthError, MalformedResponseError or FrameNotFound.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual bool supports_images() const { return false; }
};

class VisionBackend {
 public:
  virtual ~VisionBackend() = default;
  virtual std::string describe(const VisionRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual TokenEmbeddings embed_tokens(std::span<const std::string> tokens,
                                       const std::string& model_id) = 0;
};

// Append-only record of every backend attempt, in call order. Thread-safe.
class CallLog {
 public:
  void append(json entry);
  std::vector<json> entries() const;
  std::size_t size() const;
  // One JSON object per line.
  std::string to_jsonl() const;

 private:
  mutable std::mutex mutex_;
  std::vector<json> entries_;
};

using Sleeper = std::function<void(double seconds)>;
void sleep_seconds(double seconds);

// Retrying call wrappers. Transport failures are retried up to
// config.max_retries times with exponential backoff
// (retry_backoff_s * 2^attempt); auth and malformed-response errors are not.
// Every attempt is recorded in `log` when one is given.
std::string chat(ChatBackend& backend, const BackendConfig& config, ChatRequest request,
                 CallLog* log = nullptr, const Sleeper& sleeper = sleep_seconds);
std::string perceive(VisionBackend& backend, const BackendConfig& config,
                     VisionRequest request, CallLog* log = nullptr,
                     const Sleeper& sleeper = sleep_seconds);
// Throws BackendUnavailable when `backend` is null; PreconditionError on
// text with no tokens.
TokenEmbeddings embed(EmbeddingBackend* backend, const BackendConfig& config,
                      const EmbeddingRequest& request, CallLog* log = nullptr,
                      const Sleeper& sleeper = sleep_seconds);

// A backend paired with its config and the run's call log.
struct ChatClient {
  std::shared_ptr<ChatBackend> backend;
  BackendConfig config;
  std::shared_ptr<CallLog> log;
  Sleeper sleeper = sleep_seconds;

  explicit operator bool() const { return backend != nullptr; }
  std::string operator()(ChatRequest request) const {
    return chat(*backend, config, std::move(request), log.get(), sleeper);
  }
};

struct VisionClient {
  std::shared_ptr<VisionBackend> backend;
  BackendConfig config;
  std::shared_ptr<CallLog> log;
  Sleeper sleeper = sleep_seconds;

  explicit operator bool() const { return backend != nullptr; }
  std::string operator()(VisionRequest request) const {
    return perceive(*backend, config, std::move(request), log.get(), sleeper);
  }
};

struct EmbeddingClient {
  std::shared_ptr<EmbeddingBackend> backend;  // may be null: BertScore unavailable
  BackendConfig config;
  std::shared_ptr<CallLog> log;
  Sleeper sleeper = sleep_seconds;

  TokenEmbeddings operator()(const EmbeddingRequest& request) const {
    return embed(backend.get(), config, request, log.get(), sleeper);
  }
};

// ---- prompt templates ------------------------------------------------------

struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::set<std::string> required_placeholders;
};

// Builds a template whose required placeholders are every {name} in `body`.
PromptTemplate make_template(std::string template_id, std::string body);

// Placeholder names in order of first occurrence.
std::vector<std::string> placeholders_in(std::string_view body);

// Single-pass substitution of {name} placeholders. Bound values are inserted
// verbatim and never re-expanded. Throws MissingBinding naming the first
// unbound required placeholder.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings);

// Templates addressable by id; ids are file stems of *.txt files.
class TemplateStore {
 public:
  TemplateStore() = default;
  static TemplateStore load_dir(const std::filesystem::path& dir);
  // Directory shipped with the build, overridable by SCENEDIALOG_PROMPTS_DIR.
  static std::filesystem::path default_dir();
  static TemplateStore load_default();

  void add(PromptTemplate tmpl);
  bool contains(const std::string& id) const;
  const PromptTemplate& get(const std::string& id) const;  // throws IoError
  std::string render(const std::string& id,
                     const std::map<std::string, std::string>& bindings) const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace scenedialog
