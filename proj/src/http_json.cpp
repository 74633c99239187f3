#include "http_json.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"

namespace viunit {

nlohmann::json http_post_json(const HttpClientConfig& config,
                              const std::string& path,
                              const nlohmann::json& body) {
  httplib::Client client(config.base_url);
  int timeout_s = std::max(1, static_cast<int>(config.timeout_s));
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  client.set_write_timeout(timeout_s, 0);

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(50L << (attempt - 1)));
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw ServiceError("POST " + path + " returned status " +
                         std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError("POST " + path + " returned invalid JSON: " +
                         e.what());
    }
  }
  throw BackendUnavailable("POST " + config.base_url + path +
                           " unreachable: " + last_error);
}

}  // namespace viunit
