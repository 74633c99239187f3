#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace viunit {

// FNV-1a over bytes; stable across platforms.
std::uint64_t fnv1a(const std::string& bytes);

// Hex digest of fnv1a, used for cache keys and content addressing.
std::string content_hash(const std::string& bytes);

// Sorted keys, UTF-8, no insignificant whitespace.
std::string canonical_json(const nlohmann::json& j);

}  // namespace viunit
