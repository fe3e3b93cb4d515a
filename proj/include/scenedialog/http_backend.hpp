#pragma once

// Live backends speaking the common chat-completion HTTP protocol
// (messages array in, choices[0].message.content out) and its companion
// embeddings endpoint. The API key is read from the environment variable
// named in BackendConfig, never from config files.

#include <atomic>
#include <string>

#include "scenedialog/backends.hpp"

namespace scenedialog {

class HttpChatBackend : public ChatBackend, public VisionBackend {
 public:
  // Throws AuthError when the configured key variable is unset or empty.
  explicit HttpChatBackend(BackendConfig config, bool supports_images = true);

  std::string complete(const ChatRequest& request) override;
  // Sends the frames as image attachments to the chat endpoint.
  std::string describe(const VisionRequest& request) override;
  bool supports_images() const override { return images_; }

  // Number of HTTP requests attempted by any live backend in this process.
  static long requests_attempted();

 private:
  friend class HttpEmbeddingBackend;
  std::string send(const ChatRequest& request, bool allow_images) const;
  static json post(const BackendConfig& config, const std::string& api_key, const json& body);

  BackendConfig config_;
  std::string api_key_;
  bool images_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(BackendConfig config);
  TokenEmbeddings embed_tokens(std::span<const std::string> tokens,
                               const std::string& model_id) override;

 private:
  BackendConfig config_;
  std::string api_key_;
};

// Reads the API key named by `config`; AuthError if a name is configured but unset.
std::string read_api_key(const BackendConfig& config);

// Encodes an image file as a data: URL; FrameNotFound if unreadable.
std::string frame_data_url(const std::string& frame_ref);

}  // namespace scenedialog
