#include "viunit/harness.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "viunit/hash.hpp"
#include "viunit/text.hpp"

namespace viunit {

namespace fs = std::filesystem;

std::string itm_query(const std::string& statement) {
  return "Verify image matches text=\"" + statement + "\"";
}

std::optional<std::string> itm_statement(const std::string& query) {
  const std::string prefix = "Verify image matches text=\"";
  if (query.rfind(prefix, 0) != 0 || query.size() <= prefix.size() ||
      query.back() != '"')
    return std::nullopt;
  return query.substr(prefix.size(), query.size() - prefix.size() - 1);
}

std::vector<DatasetRecord> ingest(const std::string& path, bool lenient,
                                  std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset: " + path);

  std::vector<DatasetRecord> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    std::string full = path + ":" + std::to_string(line_no) + ": " + msg;
    if (!lenient) throw FormatError(full);
    if (warnings) warnings->push_back(full);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
      continue;
    }
    DatasetRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      std::string task = j.at("task").get<std::string>();
      if (task == "vqa") rec.task = TaskKind::vqa;
      else if (task == "itm") rec.task = TaskKind::itm;
      else throw FormatError("unknown task '" + task + "'");
      rec.query = j.at("query").get<std::string>();
      rec.image_ref = j.at("image").get<std::string>();
      rec.gold = j.at("gold").get<std::string>();
    } catch (const std::exception& e) {
      fail(std::string("bad record: ") + e.what());
      continue;
    }
    if (!ids.insert(rec.id).second) {
      fail("duplicate id '" + rec.id + "'");
      continue;
    }
    if (rec.task == TaskKind::itm) {
      std::string g = normalize_answer(rec.gold);
      if (g != "yes" && g != "no") {
        fail("itm gold must be yes/no, got '" + rec.gold + "' (id '" +
             rec.id + "')");
        continue;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

double accuracy(const std::vector<RecordResult>& results) {
  if (results.empty()) throw EmptyResults("no results to score");
  double correct = 0;
  for (const auto& r : results)
    if (r.final_outcome.kind == dsl::OutcomeKind::answer &&
        normalize_answer(r.final_outcome.answer) == normalize_answer(r.gold))
      ++correct;
  return correct / static_cast<double>(results.size());
}

double error_rate(const std::vector<RecordResult>& results) {
  if (results.empty()) throw EmptyResults("no results to score");
  double errors = 0;
  for (const auto& r : results)
    if (r.final_outcome.kind != dsl::OutcomeKind::answer) ++errors;
  return errors / static_cast<double>(results.size());
}

ResponseCache::ResponseCache(std::string directory, CacheMode mode)
    : directory_(std::move(directory)), mode_(mode) {
  if (mode_ != CacheMode::off) fs::create_directories(directory_);
}

std::string ResponseCache::key_for(const std::string& kind,
                                   const nlohmann::json& request,
                                   long seed) const {
  nlohmann::json key = {{"kind", kind},
                        {"request", request},
                        {"seed", seed}};
  return content_hash(canonical_json(key));
}

nlohmann::json ResponseCache::cached_call(
    const std::string& kind, const nlohmann::json& request, long seed,
    const std::function<nlohmann::json()>& live) {
  if (mode_ == CacheMode::off) {
    ++live_calls_;
    return live();
  }
  std::string key = key_for(kind, request, seed);
  fs::path file = fs::path(directory_) / (key + ".json");
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ifstream in(file);
    if (in) {
      nlohmann::json entry = nlohmann::json::parse(in);
      return entry.at("response");
    }
  }
  if (mode_ == CacheMode::replay)
    throw CacheMiss("replay cache has no entry for key " + key + " (" + kind +
                    ")");
  nlohmann::json response;
  {
    ++live_calls_;
    response = live();
  }
  nlohmann::json entry = {{"kind", kind},
                          {"request", request},
                          {"seed", seed},
                          {"response", response}};
  std::lock_guard<std::mutex> lock(mutex_);
  fs::path tmp = file;
  tmp += ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  out << canonical_json(entry);
  out.close();
  fs::rename(tmp, file);  // entries are immutable once written
  return response;
}

std::vector<std::string> CachingChatClient::complete(
    const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json req = {{"model", request.model},
                        {"messages", messages},
                        {"temperature", request.temperature},
                        {"top_p", request.top_p},
                        {"n", request.n}};
  nlohmann::json res = cache_.cached_call("chat", req, seed_, [&]() {
    if (!inner_) throw ServiceError("no live chat client configured");
    return nlohmann::json(inner_->complete(request));
  });
  return res.get<std::vector<std::string>>();
}

RunConfig RunConfig::load(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config: " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("invalid config JSON: " + std::string(e.what()));
    }
    cfg.chat_url = j.value("chat_url", cfg.chat_url);
    cfg.perception_url = j.value("perception_url", cfg.perception_url);
    cfg.image_url = j.value("image_url", cfg.image_url);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.programs = j.value("programs", cfg.programs);
    cfg.tests = j.value("tests", cfg.tests);
    cfg.strategy = j.value("strategy", cfg.strategy);
    cfg.theta = j.value("theta", cfg.theta);
    cfg.mock = j.value("mock", cfg.mock);
  }
  if (const char* v = std::getenv("VIUNIT_CHAT_URL")) cfg.chat_url = v;
  if (const char* v = std::getenv("VIUNIT_PERCEPTION_URL"))
    cfg.perception_url = v;
  if (const char* v = std::getenv("VIUNIT_IMAGE_URL")) cfg.image_url = v;
  if (const char* v = std::getenv("VIUNIT_CACHE_DIR")) cfg.cache_dir = v;
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  return {{"chat_url", chat_url},
          {"perception_url", perception_url},
          {"image_url", image_url},
          {"cache_dir", cache_dir},
          {"seed", seed},
          {"programs", programs},
          {"tests", tests},
          {"strategy", strategy},
          {"theta", theta},
          {"mock", mock}};
}

std::string manifest_bytes(const nlohmann::json& manifest) {
  return canonical_json(manifest) + "\n";
}

void write_manifest(const nlohmann::json& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << manifest_bytes(manifest);
}

ImageHandle resolve_image(const std::string& image_ref,
                          const std::string& base_dir) {
  fs::path p(image_ref);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  if (!fs::exists(p)) throw FormatError("image reference not found: " + p.string());
  if (p.extension() == ".json")
    return ImageHandle::from_scene(SceneGraph::load(p.string()));
  ImageHandle handle;
  handle.id = "file:" + p.string();
  return handle;
}

}  // namespace viunit
