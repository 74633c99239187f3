#pragma once

#include <memory>
#include <string>
#include <vector>

#include "viunit/chat_client.hpp"
#include "viunit/perception.hpp"

namespace viunit {

// Caption embedding service.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

// Deterministic token-hashed bag-of-words embedder, L2-normalized.
std::shared_ptr<Embedder> hash_embedder(std::size_t dimension);

// POST /embed {texts: [...]} -> {vectors: [[...], ...]}
class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(HttpClientConfig config, std::size_t dimension)
      : config_(std::move(config)), dimension_(dimension) {}

  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(const std::string& text) override;

 private:
  HttpClientConfig config_;
  std::size_t dimension_;
};

struct GeneratedImage {
  std::string image_b64;
  bool nsfw_flag = false;
};

// Text-to-image service.
class ImageService {
 public:
  virtual ~ImageService() = default;
  virtual GeneratedImage generate(const std::string& prompt, long seed,
                                  double guidance, int steps,
                                  const std::string& layout_json) = 0;
};

// POST /generate {prompt, seed, guidance, steps, layout?}
//   -> {image_b64, nsfw_flag}
class HttpImageService : public ImageService {
 public:
  explicit HttpImageService(HttpClientConfig config)
      : config_(std::move(config)) {}

  GeneratedImage generate(const std::string& prompt, long seed,
                          double guidance, int steps,
                          const std::string& layout_json) override;

 private:
  HttpClientConfig config_;
};

// Perception over remote model services (detector, VQA, ITM).
// POST /detect {image_id|image_b64, query, threshold}
//   -> {boxes: [[l,low,r,up],...], scores: [...]}
// POST /vqa {image, box, question} -> {answer}
// POST /itm {image, box, text} -> {score}
class RemoteBackend : public PerceptionBackend {
 public:
  RemoteBackend(BackendConfig config, std::string base_url)
      : config_(std::move(config)), base_url_(std::move(base_url)) {
    config_.validate();
  }

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
  BackendConfig config_;
  std::string base_url_;
};

}  // namespace viunit
