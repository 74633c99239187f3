#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viunit/chat_client.hpp"
#include "viunit/scoring.hpp"

namespace viunit {

enum class FallbackKind { vqa_model, itm_threshold };

struct RefusalConfig {
  double theta = 0.7;
  FallbackKind fallback = FallbackKind::vqa_model;
  // ITM fallback: similarity >= this -> "yes".
  double itm_yes_threshold = 0.8;
  // Statement checked by the ITM fallback (the raw text for itm tasks).
  std::string itm_statement;
};

struct RepromptConfig {
  double theta = 0.7;
  int max_iterations = 3;
  int programs_per_round = 1;
  std::string model = "default";
  double temperature = 0.7;
};

struct RewardRecord {
  std::string id;
  std::string query;
  std::string program;
  double raw_reward = 0;
  double training_weight = 0;  // max(raw_reward, 0)
  int iteration = 0;
  std::optional<std::string> gold;

  std::string to_jsonl() const;
};

struct TestFeedbackEntry {
  std::string caption;    // "Image Content"
  std::string expected;   // "Ground Truth Answer"
  std::string predicted;  // "Program Output": answer text or diagnostic
};

struct SelectionResult {
  ScoredProgram winner;
  dsl::ExecutionOutcome final_outcome;
  std::vector<double> pool_scores;
};

struct RefusalDecision {
  bool refused = false;
  double winner_score = 0;
  std::string answer;
  ScoredProgram winner;
};

struct RepromptIteration {
  int index = 0;          // correction round, starting at 1
  double best_score = 0;  // best aggregate within this round's pool
};

struct RepromptResult {
  ScoredProgram best;  // best-scoring program across all rounds
  dsl::ExecutionOutcome final_outcome;
  std::vector<RepromptIteration> trace;  // one entry per correction round
  int llm_calls = 0;
};

// Scores the pool on the suite, picks the argmax, runs it on the target.
SelectionResult run_selection(const std::vector<dsl::ProgramSource>& pool,
                              const std::vector<UnitTest>& suite,
                              const ImageHandle& target,
                              PerceptionBackend& backend,
                              const ScoreConfig& cfg);

// Refuses when the winner's score is strictly below theta, answering through
// the configured fallback instead.
RefusalDecision run_refusal(const std::string& query,
                            const std::vector<dsl::ProgramSource>& pool,
                            const std::vector<UnitTest>& suite,
                            const ImageHandle& target,
                            PerceptionBackend& backend, const ScoreConfig& cfg,
                            const RefusalConfig& refusal);

// F1 where refusing a would-fail program is the true positive.
// Returns 0 when no positives exist.
double refusal_f1(const std::vector<std::pair<bool, bool>>& decisions);

// Per-test feedback rows for a scored program.
std::vector<TestFeedbackEntry> test_feedback(const ScoredProgram& scored);

// "Test A / Image Content / Ground Truth Answer / Program Output" block.
std::string render_feedback_block(const std::vector<TestFeedbackEntry>& rows);

// Fills the correction template's INSERT_QUERY_HERE / INSERT_CODE_HERE /
// INSERT_UNIT_TEST_OUTPUTS_HERE placeholders.
std::string render_reprompt(const std::string& template_text,
                            const std::string& query,
                            const std::string& program_text,
                            const std::string& feedback_block);

// Iterative correction: while the best score is below theta, prompt for
// replacement programs with test feedback; suites stay fixed; the best
// program seen anywhere wins.
RepromptResult run_reprompt(const std::string& query,
                            const std::vector<dsl::ProgramSource>& initial,
                            const std::vector<UnitTest>& suite,
                            const ImageHandle& target,
                            PerceptionBackend& backend, ChatClient& llm,
                            const ScoreConfig& cfg, const RepromptConfig& rc,
                            const std::string& reprompt_template);

// 1 when the suite score clears theta, otherwise the score itself.
double viunit_reward(double s, double theta);

// Exact-match indicator; error outcomes never match.
double correctness_reward(const dsl::ExecutionOutcome& predicted,
                          const std::string& gold);

enum class RewardKind { correctness, viunit };

struct RewardExample {
  std::string id;
  std::string query;
  ImageHandle image;
  std::optional<std::string> gold;
  dsl::ProgramSource program;
  std::vector<UnitTest> suite;  // ignored by the correctness kind
  int iteration = 0;
};

std::vector<RewardRecord> emit_reward_dataset(
    const std::vector<RewardExample>& examples, PerceptionBackend& backend,
    RewardKind kind, double theta, const ScoreConfig& cfg = {});

void write_reward_jsonl(const std::vector<RewardRecord>& records,
                        const std::string& path);

// Halt policy iteration iff the last mean reward strictly declined.
bool stop_rule(const std::vector<double>& mean_rewards_per_iteration);

}  // namespace viunit
