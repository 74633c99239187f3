#include "viunit/hash.hpp"

#include <array>
#include <cstdio>

namespace viunit {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string content_hash(const std::string& bytes) {
  // Two passes with different salts to widen the digest.
  std::uint64_t a = fnv1a(bytes);
  std::uint64_t b = fnv1a(bytes + "#viunit");
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return std::string(buf);
}

std::string canonical_json(const nlohmann::json& j) {
  // nlohmann::json objects iterate in sorted key order already.
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace viunit
