#pragma once

// Deterministic scripted backends for offline runs and tests. Each backend
// serializes internally, so identical request sequences always yield
// identical response sequences.

#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "scenedialog/backends.hpp"

namespace scenedialog {

// A scripted reply: either text or an error of a named kind
// ("transport", "auth", "malformed", "frame_not_found", "unavailable").
struct ScriptItem {
  std::string text;
  std::optional<std::string> error_kind;
  std::string error_message;

  static ScriptItem reply(std::string text) { return ScriptItem{std::move(text), {}, {}}; }
  static ScriptItem failure(std::string kind, std::string message = "scripted failure") {
    return ScriptItem{{}, std::move(kind), std::move(message)};
  }
  // Returns the text or throws the scripted error.
  std::string resolve() const;
};

void from_json(const json& j, ScriptItem& v);

// Replies are queued per request purpose; "*" is the fallback queue.
class ScriptedChatBackend : public ChatBackend {
 public:
  explicit ScriptedChatBackend(bool supports_images = false) : images_(supports_images) {}

  void push(const std::string& purpose, ScriptItem item);
  void push(const std::string& purpose, std::string text) {
    push(purpose, ScriptItem::reply(std::move(text)));
  }

  std::string complete(const ChatRequest& request) override;
  bool supports_images() const override { return images_; }

 private:
  bool images_;
  std::mutex mutex_;
  std::map<std::string, std::deque<ScriptItem>> queues_;
};

// Replies keyed by (prompt kind, frame ref). Lookup order for a request:
// the first of its frames with a keyed reply, then the kind's default, then
// the kind's queue. A frame with no reply at all is FrameNotFound.
class ScriptedVisionBackend : public VisionBackend {
 public:
  void set(const std::string& kind, const std::string& frame_ref, ScriptItem item);
  void set_default(const std::string& kind, ScriptItem item);
  void push(const std::string& kind, ScriptItem item);

  std::string describe(const VisionRequest& request) override;

 private:
  struct KindScript {
    std::map<std::string, ScriptItem> by_frame;
    std::optional<ScriptItem> fallback;
    std::deque<ScriptItem> queue;
  };
  std::mutex mutex_;
  std::map<std::string, KindScript> kinds_;
};

// Fixed token -> vector table; unknown tokens either get a deterministic
// pseudo-random unit vector (hash_fallback) or raise MalformedResponseError.
class ScriptedEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit ScriptedEmbeddingBackend(std::size_t dim, bool hash_fallback = true)
      : dim_(dim), hash_fallback_(hash_fallback) {}

  void set(const std::string& token, std::vector<double> vector);
  TokenEmbeddings embed_tokens(std::span<const std::string> tokens,
                               const std::string& model_id) override;

  // Unit vector derived from a stable hash of the token.
  static std::vector<double> hashed_unit_vector(const std::string& token, std::size_t dim);

 private:
  std::size_t dim_;
  bool hash_fallback_;
  std::mutex mutex_;
  std::map<std::string, std::vector<double>> table_;
};

// All scripted backends for one run, decoded from a "script" document:
//   {"chat": {purpose: [item...]}, "judge": {...}, "vision_chat": {...},
//    "vision": {kind: {"frames": {ref: item}, "default": item, "queue": [item...]}},
//    "embedding": {"dim": d, "tokens": {tok: [..]}, "hash_fallback": bool}}
// An item is a string or {"error": kind, "message": text}.
struct ScriptedBackends {
  std::shared_ptr<ScriptedChatBackend> chat;
  std::shared_ptr<ScriptedVisionBackend> vision;
  std::shared_ptr<ScriptedChatBackend> vision_chat;     // null when absent
  std::shared_ptr<ScriptedChatBackend> judge;           // null when absent
  std::shared_ptr<ScriptedEmbeddingBackend> embedding;  // null when absent
};

ScriptedBackends scripted_from_json(const json& data);
// Accepts a script document path, or a directory holding script.json.
ScriptedBackends load_script(const std::filesystem::path& path);

}  // namespace scenedialog
