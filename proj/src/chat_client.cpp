#include "viunit/chat_client.hpp"

#include "http_json.hpp"

namespace viunit {

void ScriptedChatClient::enqueue(const std::string& probe,
                                 std::vector<std::string> sequences) {
  for (auto& [key, queue] : queues_) {
    if (key == probe) {
      queue.push_back(std::move(sequences));
      return;
    }
  }
  queues_.emplace_back(probe,
                       std::vector<std::vector<std::string>>{
                           std::move(sequences)});
}

void ScriptedChatClient::set_default(std::vector<std::string> sequences) {
  default_ = std::move(sequences);
  has_default_ = true;
}

std::vector<std::string> ScriptedChatClient::complete(
    const ChatRequest& request) {
  ++calls_;
  std::string prompt;
  for (auto it = request.messages.rbegin(); it != request.messages.rend();
       ++it) {
    if (it->role == "user") {
      prompt = it->content;
      break;
    }
  }
  for (auto& [probe, queue] : queues_) {
    if (prompt.find(probe) == std::string::npos) continue;
    if (queue.empty()) break;
    std::vector<std::string> out = std::move(queue.front());
    queue.erase(queue.begin());
    return out;
  }
  if (has_default_) return default_;
  throw ServiceError("no scripted response for prompt");
}

std::vector<std::string> HttpChatClient::complete(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {{"model", request.model},
                         {"messages", messages},
                         {"temperature", request.temperature},
                         {"top_p", request.top_p},
                         {"n", request.n}};
  nlohmann::json res = http_post_json(config_, "/v1/chat/completions", body);
  if (!res.contains("choices") || !res["choices"].is_array())
    throw ServiceError("chat response missing choices array");
  std::vector<std::string> out;
  for (const auto& choice : res["choices"]) {
    if (!choice.contains("message") || !choice["message"].contains("content"))
      throw ServiceError("chat choice missing message content");
    out.push_back(choice["message"]["content"].get<std::string>());
  }
  if (out.empty()) throw ServiceError("chat response had zero choices");
  return out;
}

}  // namespace viunit
