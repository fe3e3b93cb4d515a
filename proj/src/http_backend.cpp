#include "scenedialog/http_backend.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include "scenedialog/errors.hpp"

namespace scenedialog {

namespace {

std::atomic<long> g_requests{0};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint url has no scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "image/jpeg";
}

json message_json(const ChatMessage& m, const std::vector<std::string>& images) {
  if (images.empty()) return json{{"role", to_string(m.role)}, {"content", m.content}};
  json parts = json::array({json{{"type", "text"}, {"text", m.content}}});
  for (const auto& ref : images)
    parts.push_back(json{{"type", "image_url"}, {"image_url", {{"url", frame_data_url(ref)}}}});
  return json{{"role", to_string(m.role)}, {"content", parts}};
}

std::string first_choice_text(const json& response) {
  try {
    const json& content = response.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw MalformedResponseError("choice content is not text");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("unexpected chat response shape: ") + e.what());
  }
}

}  // namespace

std::string read_api_key(const BackendConfig& config) {
  if (config.api_key_env_var.empty()) return {};
  const char* value = std::getenv(config.api_key_env_var.c_str());
  if (value == nullptr || *value == '\0')
    throw AuthError("environment variable " + config.api_key_env_var + " is not set");
  return value;
}

std::string frame_data_url(const std::string& frame_ref) {
  std::ifstream in(frame_ref, std::ios::binary);
  if (!in) throw FrameNotFound("frame not readable: " + frame_ref);
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return "data:" + mime_for(frame_ref) + ";base64," + base64(bytes.str());
}

HttpChatBackend::HttpChatBackend(BackendConfig config, bool supports_images)
    : config_(std::move(config)), images_(supports_images) {
  validate(config_);
  parse_url(config_.endpoint_url);
  api_key_ = read_api_key(config_);
}

long HttpChatBackend::requests_attempted() { return g_requests.load(); }

json HttpChatBackend::post(const BackendConfig& config, const std::string& api_key,
                           const json& body) {
  const auto url = parse_url(config.endpoint_url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::duration<double>(config.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  ++g_requests;
  auto res = client.Post(url.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + url.origin + " failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403)
    throw AuthError("HTTP " + std::to_string(res->status) + " from " + url.origin);
  if (res->status == 408 || res->status == 429 || res->status >= 500)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + url.origin);
  if (res->status < 200 || res->status >= 300)
    throw MalformedResponseError("HTTP " + std::to_string(res->status) + ": " + res->body);
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw MalformedResponseError("response body is not JSON");
  return parsed;
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  return send(request, images_);
}

std::string HttpChatBackend::send(const ChatRequest& request, bool allow_images) const {
  if (!request.attachments.empty() && !allow_images)
    throw BackendUnavailable("backend does not accept image attachments");
  json messages = json::array();
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    const bool last = i + 1 == request.messages.size();
    messages.push_back(message_json(request.messages[i],
                                    last ? request.attachments : std::vector<std::string>{}));
  }
  json body{{"model", request.model_id.empty() ? config_.model_id : request.model_id},
            {"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  return first_choice_text(post(config_, api_key_, body));
}

std::string HttpChatBackend::describe(const VisionRequest& request) {
  for (const auto& ref : request.frame_refs)
    if (!std::filesystem::exists(ref)) throw FrameNotFound("frame not found: " + ref);
  ChatRequest chat;
  chat.messages = {ChatMessage{MessageRole::User, request.prompt}};
  chat.attachments = request.frame_refs;
  chat.temperature = 0.0;
  chat.model_id = request.model_id;
  return send(chat, true);
}

HttpEmbeddingBackend::HttpEmbeddingBackend(BackendConfig config) : config_(std::move(config)) {
  validate(config_);
  parse_url(config_.endpoint_url);
  api_key_ = read_api_key(config_);
}

TokenEmbeddings HttpEmbeddingBackend::embed_tokens(std::span<const std::string> tokens,
                                                   const std::string& model_id) {
  json body{{"model", model_id.empty() ? config_.model_id : model_id},
            {"input", std::vector<std::string>(tokens.begin(), tokens.end())}};
  json res = HttpChatBackend::post(config_, api_key_, body);
  try {
    TokenEmbeddings out(tokens.size());
    for (const auto& item : res.at("data")) {
      const auto index = item.value("index", std::size_t{0});
      if (index >= out.size()) throw MalformedResponseError("embedding index out of range");
      out[index] = item.at("embedding").get<std::vector<double>>();
    }
    return out;
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("unexpected embedding response: ") + e.what());
  }
}

}  // namespace scenedialog
