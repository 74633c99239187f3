#pragma once

#include <stdexcept>
#include <string>

namespace viunit {

struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnresolvableImage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ServiceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyGeneration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyPool : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooFewItems : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LayoutUnparsable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GrammarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CacheMiss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySuite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyResults : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace viunit
