#pragma once

#include <string>

#include "json.hpp"
#include "viunit/chat_client.hpp"

namespace viunit {

// JSON POST with bounded retries and exponential backoff. Throws
// BackendUnavailable when the endpoint stays unreachable and ServiceError on
// malformed responses or non-2xx statuses that survive the retry budget.
nlohmann::json http_post_json(const HttpClientConfig& config,
                              const std::string& path,
                              const nlohmann::json& body);

}  // namespace viunit
