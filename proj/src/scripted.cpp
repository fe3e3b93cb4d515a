#include "scenedialog/scripted.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>

#include "scenedialog/errors.hpp"
#include "scenedialog/model.hpp"

namespace scenedialog {

std::string ScriptItem::resolve() const {
  if (!error_kind) return text;
  const std::string& k = *error_kind;
  if (k == "transport") throw TransportError(error_message);
  if (k == "auth") throw AuthError(error_message);
  if (k == "malformed") throw MalformedResponseError(error_message);
  if (k == "frame_not_found") throw FrameNotFound(error_message);
  if (k == "unavailable") throw BackendUnavailable(error_message);
  throw TransportError(k + ": " + error_message);
}

void from_json(const json& j, ScriptItem& v) {
  if (j.is_string()) {
    v = ScriptItem::reply(j.get<std::string>());
  } else {
    v = ScriptItem::failure(j.at("error").get<std::string>(),
                            j.value("message", std::string{"scripted failure"}));
  }
}

void ScriptedChatBackend::push(const std::string& purpose, ScriptItem item) {
  std::lock_guard lock(mutex_);
  queues_[purpose].push_back(std::move(item));
}

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  ScriptItem item;
  {
    std::lock_guard lock(mutex_);
    auto take = [&](const std::string& key) {
      auto it = queues_.find(key);
      if (it == queues_.end() || it->second.empty()) return false;
      item = std::move(it->second.front());
      it->second.pop_front();
      return true;
    };
    if (!take(request.purpose) && !take("*"))
      throw ScriptExhausted("no scripted reply left for '" + request.purpose + "'");
  }
  return item.resolve();
}

void ScriptedVisionBackend::set(const std::string& kind, const std::string& frame_ref,
                                ScriptItem item) {
  std::lock_guard lock(mutex_);
  kinds_[kind].by_frame[frame_ref] = std::move(item);
}

void ScriptedVisionBackend::set_default(const std::string& kind, ScriptItem item) {
  std::lock_guard lock(mutex_);
  kinds_[kind].fallback = std::move(item);
}

void ScriptedVisionBackend::push(const std::string& kind, ScriptItem item) {
  std::lock_guard lock(mutex_);
  kinds_[kind].queue.push_back(std::move(item));
}

std::string ScriptedVisionBackend::describe(const VisionRequest& request) {
  ScriptItem item;
  {
    std::lock_guard lock(mutex_);
    auto it = kinds_.find(request.kind);
    if (it == kinds_.end())
      throw FrameNotFound("no scripted '" + request.kind + "' description for " +
                          (request.frame_refs.empty() ? std::string("<none>")
                                                      : request.frame_refs.front()));
    KindScript& ks = it->second;
    bool found = false;
    for (const auto& ref : request.frame_refs) {
      if (auto f = ks.by_frame.find(ref); f != ks.by_frame.end()) {
        item = f->second;
        found = true;
        break;
      }
    }
    if (!found && ks.fallback) {
      item = *ks.fallback;
      found = true;
    }
    if (!found && !ks.queue.empty()) {
      item = std::move(ks.queue.front());
      ks.queue.pop_front();
      found = true;
    }
    if (!found)
      throw FrameNotFound("no scripted '" + request.kind + "' description for " +
                          (request.frame_refs.empty() ? std::string("<none>")
                                                      : request.frame_refs.front()));
  }
  return item.resolve();
}

void ScriptedEmbeddingBackend::set(const std::string& token, std::vector<double> vector) {
  if (vector.size() != dim_) throw ValidationError("embedding for '" + token + "' has wrong dim");
  std::lock_guard lock(mutex_);
  table_[token] = std::move(vector);
}

std::vector<double> ScriptedEmbeddingBackend::hashed_unit_vector(const std::string& token,
                                                                 std::size_t dim) {
  // FNV-1a keeps the seed stable across platforms, unlike std::hash.
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::mt19937_64 rng(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    v.assign(dim, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

TokenEmbeddings ScriptedEmbeddingBackend::embed_tokens(std::span<const std::string> tokens,
                                                       const std::string&) {
  std::lock_guard lock(mutex_);
  TokenEmbeddings out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto it = table_.find(t); it != table_.end()) {
      out.push_back(it->second);
    } else if (hash_fallback_) {
      out.push_back(hashed_unit_vector(t, dim_));
    } else {
      throw MalformedResponseError("no scripted embedding for token '" + t + "'");
    }
  }
  return out;
}

namespace {

std::shared_ptr<ScriptedChatBackend> chat_from(const json& j, bool images) {
  auto backend = std::make_shared<ScriptedChatBackend>(images);
  for (const auto& [purpose, items] : j.items()) {
    if (purpose == "supports_images") continue;
    for (const auto& item : items) backend->push(purpose, item.get<ScriptItem>());
  }
  return backend;
}

}  // namespace

ScriptedBackends scripted_from_json(const json& data) {
  ScriptedBackends b;
  try {
    b.chat = chat_from(data.value("chat", json::object()), false);
    b.vision = std::make_shared<ScriptedVisionBackend>();
    const json vision = data.value("vision", json::object());
    for (const auto& [kind, spec] : vision.items()) {
      const json frames = spec.value("frames", json::object());
      for (const auto& [ref, item] : frames.items()) b.vision->set(kind, ref, item.get<ScriptItem>());
      if (spec.contains("default")) b.vision->set_default(kind, spec["default"].get<ScriptItem>());
      const json queue = spec.value("queue", json::array());
      for (const auto& item : queue)
        b.vision->push(kind, item.get<ScriptItem>());
    }
    if (data.contains("vision_chat")) b.vision_chat = chat_from(data["vision_chat"], true);
    if (data.contains("judge")) b.judge = chat_from(data["judge"], false);
    if (data.contains("embedding")) {
      const json& e = data["embedding"];
      b.embedding = std::make_shared<ScriptedEmbeddingBackend>(e.at("dim").get<std::size_t>(),
                                                               e.value("hash_fallback", true));
      const json tokens = e.value("tokens", json::object());
      for (const auto& [tok, vec] : tokens.items())
        b.embedding->set(tok, vec.get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed script: ") + e.what());
  }
  return b;
}

ScriptedBackends load_script(const std::filesystem::path& path) {
  auto file = std::filesystem::is_directory(path) ? path / "script.json" : path;
  std::ifstream in(file);
  if (!in) throw IoError("cannot open script " + file.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw SchemaError("script " + file.string() + " is not valid JSON");
  return scripted_from_json(from_document(doc, "script"));
}

}  // namespace scenedialog
