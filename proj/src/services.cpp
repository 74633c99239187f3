#include "viunit/services.hpp"

#include <cmath>

#include "http_json.hpp"
#include "viunit/hash.hpp"
#include "viunit/text.hpp"

namespace viunit {

namespace {

class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const override { return dimension_; }

  std::vector<double> embed(const std::string& text) override {
    std::vector<double> v(dimension_, 0.0);
    for (const std::string& word : split_words(to_lower(text))) {
      std::uint64_t h = fnv1a(word);
      std::size_t slot = h % dimension_;
      double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
      v[slot] += sign;
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : v) x /= norm;
    return v;
  }

 private:
  std::size_t dimension_;
};

nlohmann::json image_field(const ImageHandle& image) {
  if (!image.image_b64.empty()) return image.image_b64;
  return image.id;
}

nlohmann::json box_field(const Box& box) {
  return nlohmann::json::array({box.left, box.lower, box.right, box.upper});
}

}  // namespace

std::shared_ptr<Embedder> hash_embedder(std::size_t dimension) {
  if (dimension < 8)
    throw std::invalid_argument("hash embedder dimension must be >= 8");
  return std::make_shared<HashEmbedder>(dimension);
}

std::vector<double> RemoteEmbedder::embed(const std::string& text) {
  nlohmann::json res = http_post_json(
      config_, "/embed", {{"texts", nlohmann::json::array({text})}});
  if (!res.contains("vectors") || !res["vectors"].is_array() ||
      res["vectors"].empty())
    throw ServiceError("embed response missing vectors");
  auto v = res["vectors"][0].get<std::vector<double>>();
  if (v.size() != dimension_)
    throw ServiceError("embed vector has dimension " +
                       std::to_string(v.size()) + ", expected " +
                       std::to_string(dimension_));
  return v;
}

GeneratedImage HttpImageService::generate(const std::string& prompt, long seed,
                                          double guidance, int steps,
                                          const std::string& layout_json) {
  nlohmann::json body = {{"prompt", prompt},
                         {"seed", seed},
                         {"guidance", guidance},
                         {"steps", steps}};
  if (!layout_json.empty()) body["layout"] = nlohmann::json::parse(layout_json);
  nlohmann::json res = http_post_json(config_, "/generate", body);
  if (!res.contains("image_b64"))
    throw ServiceError("generate response missing image_b64");
  GeneratedImage out;
  out.image_b64 = res["image_b64"].get<std::string>();
  out.nsfw_flag = res.value("nsfw_flag", false);
  return out;
}

std::vector<Detection> RemoteBackend::detect(const ImageHandle& image,
                                             const std::string& object_name) {
  HttpClientConfig http{base_url_, config_.request_timeout_s,
                        config_.max_retries};
  nlohmann::json res = http_post_json(
      http, "/detect",
      {{"image", image_field(image)},
       {"query", object_name},
       {"threshold", config_.detection_threshold}});
  if (!res.contains("boxes") || !res["boxes"].is_array())
    throw ServiceError("detect response missing boxes");
  std::vector<Detection> out;
  for (const auto& b : res["boxes"]) {
    if (!b.is_array() || b.size() != 4)
      throw ServiceError("detect box must be [l, lower, r, upper]");
    out.push_back(Detection{Box{b[0].get<double>(), b[1].get<double>(),
                                b[2].get<double>(), b[3].get<double>()},
                            object_name});
  }
  return out;
}

bool RemoteBackend::verify_property(const ImageHandle& image, const Box& box,
                                    const std::string& object_name,
                                    const std::string& property) {
  std::string question =
      "Is the " + object_name + " " + property + "?";
  return normalize_answer(simple_query(image, box, question)) == "yes";
}

std::string RemoteBackend::simple_query(const ImageHandle& image,
                                        const Box& box,
                                        const std::string& question) {
  HttpClientConfig http{base_url_, config_.request_timeout_s,
                        config_.max_retries};
  nlohmann::json res = http_post_json(http, "/vqa",
                                      {{"image", image_field(image)},
                                       {"box", box_field(box)},
                                       {"question", question}});
  if (!res.contains("answer"))
    throw ServiceError("vqa response missing answer");
  return res["answer"].get<std::string>();
}

double RemoteBackend::itm_score(const ImageHandle& image, const Box& box,
                                const std::string& statement) {
  HttpClientConfig http{base_url_, config_.request_timeout_s,
                        config_.max_retries};
  nlohmann::json res = http_post_json(http, "/itm",
                                      {{"image", image_field(image)},
                                       {"box", box_field(box)},
                                       {"text", statement}});
  if (!res.contains("score"))
    throw ServiceError("itm response missing score");
  return res["score"].get<double>();
}

}  // namespace viunit
