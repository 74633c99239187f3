#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "viunit/errors.hpp"

namespace viunit {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model = "default";
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  double top_p = 1.0;
  int n = 1;  // number of sampled sequences
};

// Chat-completion client: one request, n completion texts back.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::vector<std::string> complete(const ChatRequest& request) = 0;
};

// Table-driven client for fixtures: responses keyed by a substring probe
// against the last user message, consumed in order per key.
class ScriptedChatClient : public ChatClient {
 public:
  // Queue a response set for prompts containing `probe`. Each call matching
  // the probe pops the next queued response list.
  void enqueue(const std::string& probe, std::vector<std::string> sequences);
  // Fallback used when no probe matches.
  void set_default(std::vector<std::string> sequences);

  std::vector<std::string> complete(const ChatRequest& request) override;

  int calls() const { return calls_; }

 private:
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>>
      queues_;
  std::vector<std::string> default_;
  bool has_default_ = false;
  int calls_ = 0;
};

struct HttpClientConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  double timeout_s = 30.0;
  int max_retries = 2;
};

// Client over the open chat-completions wire shape:
// POST /v1/chat/completions {model, messages, temperature, top_p, n}
//   -> {choices: [{message: {content}}, ...]}
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config)
      : config_(std::move(config)) {}

  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  HttpClientConfig config_;
};

}  // namespace viunit
