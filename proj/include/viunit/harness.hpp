#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "viunit/chat_client.hpp"
#include "viunit/dsl/program.hpp"
#include "viunit/testgen.hpp"

namespace viunit {

struct DatasetRecord {
  std::string id;
  TaskKind task = TaskKind::vqa;
  std::string query;      // ITM queries rendered as Verify image matches text="..."
  std::string image_ref;  // path to an image or scene-graph JSON
  std::string gold;
};

// JSONL: {"id", "task": "vqa"|"itm", "query", "image", "gold"}.
// Malformed lines are fatal with their line number unless lenient, in which
// case they are skipped and reported through `warnings`.
std::vector<DatasetRecord> ingest(const std::string& path, bool lenient = false,
                                  std::vector<std::string>* warnings = nullptr);

// Builds the canonical ITM query text for a statement.
std::string itm_query(const std::string& statement);

// Extracts the statement back out of an ITM query; nullopt for VQA shapes.
std::optional<std::string> itm_statement(const std::string& query);

struct RecordResult {
  std::string id;
  dsl::ExecutionOutcome final_outcome;
  std::string gold;
};

// Fraction of records whose normalized answer equals normalized gold;
// error outcomes count as incorrect.
double accuracy(const std::vector<RecordResult>& results);

// Fraction of records whose final execution was an error outcome.
double error_rate(const std::vector<RecordResult>& results);

enum class CacheMode { off, record, replay };

// Content-addressed response cache: key = hash(kind, canonical request,
// seed). Entries are immutable JSON files; replay mode never touches the
// live client.
class ResponseCache {
 public:
  ResponseCache(std::string directory, CacheMode mode);

  nlohmann::json cached_call(const std::string& kind,
                             const nlohmann::json& request, long seed,
                             const std::function<nlohmann::json()>& live);

  std::string key_for(const std::string& kind, const nlohmann::json& request,
                      long seed) const;

  CacheMode mode() const { return mode_; }
  int live_calls() const { return live_calls_; }

 private:
  std::string directory_;
  CacheMode mode_;
  int live_calls_ = 0;
  std::mutex mutex_;
};

// Chat client wrapper routing every completion through a ResponseCache.
class CachingChatClient : public ChatClient {
 public:
  CachingChatClient(ChatClient* inner, ResponseCache& cache, long seed)
      : inner_(inner), cache_(cache), seed_(seed) {}

  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  ChatClient* inner_;  // may be null in replay mode
  ResponseCache& cache_;
  long seed_;
};

// Deterministic offline stand-in for the chat service: recognizes the
// unit-test, program-synthesis, correction, and layout prompt shapes and
// produces well-formed output derived from the query text.
class MockChatClient : public ChatClient {
 public:
  std::vector<std::string> complete(const ChatRequest& request) override;
};

struct RunConfig {
  std::string chat_url;
  std::string perception_url;
  std::string image_url;
  std::string cache_dir = "cache";
  long seed = 0;
  int programs = 5;
  std::size_t tests = 5;
  std::string strategy = "answer_then_input";
  double theta = 0.7;
  bool mock = false;
  CacheMode cache_mode = CacheMode::off;

  static RunConfig load(const std::string& path);  // JSON + env overrides
  nlohmann::json to_json() const;
};

// Canonical (sorted-key, whitespace-free) serialization; excludes wall-clock
// fields so replayed runs are byte-identical.
std::string manifest_bytes(const nlohmann::json& manifest);
void write_manifest(const nlohmann::json& manifest, const std::string& path);

// Resolves a dataset image reference into a handle (scene JSON loaded and
// attached; other files passed through as opaque ids).
ImageHandle resolve_image(const std::string& image_ref,
                          const std::string& base_dir);

}  // namespace viunit
