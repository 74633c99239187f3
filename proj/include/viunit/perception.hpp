#pragma once

#include <map>
#include <string>
#include <vector>

#include "viunit/errors.hpp"
#include "viunit/scene_graph.hpp"

namespace viunit {

struct Detection {
  Box box;
  std::string category;
};

struct BackendConfig {
  double detection_threshold = 0.2;
  double itm_threshold = 0.8;
  std::map<std::string, std::string> endpoints;  // capability -> URL
  double request_timeout_s = 30.0;
  int max_retries = 2;
  int max_in_flight = 8;

  void validate() const {
    if (detection_threshold < 0 || detection_threshold > 1 ||
        itm_threshold < 0 || itm_threshold > 1)
      throw std::invalid_argument("thresholds must lie in [0,1]");
    if (max_retries < 0)
      throw std::invalid_argument("max_retries must be >= 0");
  }
};

inline constexpr const char* kUnknownAnswer = "unknown";

// Perception interface the DSL runtime calls. Implementations must never
// fabricate answers: unreachable services surface as BackendUnavailable.
class PerceptionBackend {
 public:
  virtual ~PerceptionBackend() = default;

  virtual std::vector<Detection> detect(const ImageHandle& image,
                                        const std::string& object_name) = 0;
  virtual bool verify_property(const ImageHandle& image, const Box& box,
                               const std::string& object_name,
                               const std::string& property) = 0;
  virtual std::string simple_query(const ImageHandle& image, const Box& box,
                                   const std::string& question) = 0;
  virtual double itm_score(const ImageHandle& image, const Box& box,
                           const std::string& statement) = 0;
};

// Deterministic backend over SceneGraphs; pure function of (scene, args),
// freely shareable after construction.
class ScriptedBackend : public PerceptionBackend {
 public:
  std::vector<Detection> detect(const ImageHandle& image,
                                const std::string& object_name) override;
  bool verify_property(const ImageHandle& image, const Box& box,
                       const std::string& object_name,
                       const std::string& property) override;
  std::string simple_query(const ImageHandle& image, const Box& box,
                           const std::string& question) override;
  double itm_score(const ImageHandle& image, const Box& box,
                   const std::string& statement) override;

 private:
  static const SceneGraph& resolve(const ImageHandle& image);
  // Max-IoU object, ties to the earlier object in document order.
  static const SceneObject* best_overlap(const SceneGraph& scene,
                                         const Box& box);
};

}  // namespace viunit
