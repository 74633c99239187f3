#include "viunit/policies.hpp"

#include <fstream>

#include "json.hpp"
#include "viunit/hash.hpp"
#include "viunit/progclient.hpp"

namespace viunit {

SelectionResult run_selection(const std::vector<dsl::ProgramSource>& pool,
                              const std::vector<UnitTest>& suite,
                              const ImageHandle& target,
                              PerceptionBackend& backend,
                              const ScoreConfig& cfg) {
  std::vector<ScoredProgram> scored =
      score_programs(pool, suite, backend, cfg);
  SelectionResult result;
  result.winner = select_best(scored);
  for (const auto& s : scored) result.pool_scores.push_back(s.aggregate);
  result.final_outcome =
      dsl::run_source(result.winner.program, target, backend, cfg.limits);
  return result;
}

RefusalDecision run_refusal(const std::string& query,
                            const std::vector<dsl::ProgramSource>& pool,
                            const std::vector<UnitTest>& suite,
                            const ImageHandle& target,
                            PerceptionBackend& backend, const ScoreConfig& cfg,
                            const RefusalConfig& refusal) {
  SelectionResult selection =
      run_selection(pool, suite, target, backend, cfg);
  RefusalDecision decision;
  decision.winner = selection.winner;
  decision.winner_score = selection.winner.aggregate;
  if (selection.winner.aggregate < refusal.theta) {
    decision.refused = true;
    Box full{0, 0, 512, 512};
    if (target.scene) full = Box{0, 0, target.scene->width,
                                 target.scene->height};
    if (refusal.fallback == FallbackKind::vqa_model) {
      decision.answer = backend.simple_query(target, full, query);
    } else {
      const std::string& statement =
          refusal.itm_statement.empty() ? query : refusal.itm_statement;
      double score = backend.itm_score(target, full, statement);
      decision.answer = score >= refusal.itm_yes_threshold ? "yes" : "no";
    }
  } else {
    decision.answer = selection.final_outcome.display();
  }
  return decision;
}

double refusal_f1(const std::vector<std::pair<bool, bool>>& decisions) {
  if (decisions.empty())
    throw EmptyResults("refusal F1 needs at least one decision");
  double tp = 0, fp = 0, fn = 0;
  for (const auto& [refused, would_fail] : decisions) {
    if (refused && would_fail) ++tp;
    else if (refused && !would_fail) ++fp;
    else if (!refused && would_fail) ++fn;
  }
  double denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;  // no positives anywhere
  return 2 * tp / denom;
}

std::vector<TestFeedbackEntry> test_feedback(const ScoredProgram& scored) {
  std::vector<TestFeedbackEntry> rows;
  for (const TestResult& r : scored.per_test)
    rows.push_back(TestFeedbackEntry{r.test.caption, r.test.expected,
                                     r.outcome.display()});
  return rows;
}

namespace {

std::string test_label(std::size_t index) {
  std::string label;
  std::size_t n = index;
  do {
    label.insert(label.begin(), static_cast<char>('A' + n % 26));
    n = n / 26;
  } while (n-- > 0);
  return label;
}

}  // namespace

std::string render_feedback_block(const std::vector<TestFeedbackEntry>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += "Test " + test_label(i) + "\n";
    out += "Image Content: \"" + rows[i].caption + "\"\n";
    out += "Ground Truth Answer: \"" + rows[i].expected + "\"\n";
    out += "Program Output: \"" + rows[i].predicted + "\"\n";
  }
  return out;
}

std::string render_reprompt(const std::string& template_text,
                            const std::string& query,
                            const std::string& program_text,
                            const std::string& feedback_block) {
  std::string out = template_text;
  auto replace_one = [&](const std::string& from, const std::string& to) {
    std::size_t pos = out.find(from);
    if (pos == std::string::npos)
      throw std::invalid_argument("correction template lacks " + from);
    out.replace(pos, from.size(), to);
  };
  replace_one("INSERT_QUERY_HERE", query);
  replace_one("INSERT_CODE_HERE", program_text);
  replace_one("INSERT_UNIT_TEST_OUTPUTS_HERE", feedback_block);
  return out;
}

RepromptResult run_reprompt(const std::string& query,
                            const std::vector<dsl::ProgramSource>& initial,
                            const std::vector<UnitTest>& suite,
                            const ImageHandle& target,
                            PerceptionBackend& backend, ChatClient& llm,
                            const ScoreConfig& cfg, const RepromptConfig& rc,
                            const std::string& reprompt_template) {
  if (rc.max_iterations < 1)
    throw std::invalid_argument("max_iterations must be >= 1");

  std::vector<ScoredProgram> scored =
      score_programs(initial, suite, backend, cfg);
  RepromptResult result;
  result.best = select_best(scored);

  ScoredProgram round_best = result.best;
  for (int iter = 1;
       iter <= rc.max_iterations && result.best.aggregate < rc.theta; ++iter) {
    std::string prompt = render_reprompt(
        reprompt_template, query, round_best.program.text,
        render_feedback_block(test_feedback(round_best)));
    std::vector<dsl::ProgramSource> corrected = request_programs(
        prompt, rc.programs_per_round, llm, rc.model, rc.temperature);
    ++result.llm_calls;
    std::vector<ScoredProgram> rescored =
        score_programs(corrected, suite, backend, cfg);
    round_best = select_best(rescored);
    result.trace.push_back(RepromptIteration{iter, round_best.aggregate});
    if (round_best.aggregate > result.best.aggregate) result.best = round_best;
  }

  result.final_outcome =
      dsl::run_source(result.best.program, target, backend, cfg.limits);
  return result;
}

double viunit_reward(double s, double theta) { return s >= theta ? 1.0 : s; }

double correctness_reward(const dsl::ExecutionOutcome& predicted,
                          const std::string& gold) {
  if (predicted.kind != dsl::OutcomeKind::answer) return 0.0;
  return normalize_answer(predicted.answer) == normalize_answer(gold) ? 1.0
                                                                      : 0.0;
}

std::string RewardRecord::to_jsonl() const {
  nlohmann::json j = {{"id", id},
                      {"query", query},
                      {"program", program},
                      {"raw_reward", raw_reward},
                      {"training_weight", training_weight},
                      {"iteration", iteration}};
  if (gold) j["gold"] = *gold;
  return canonical_json(j);
}

std::vector<RewardRecord> emit_reward_dataset(
    const std::vector<RewardExample>& examples, PerceptionBackend& backend,
    RewardKind kind, double theta, const ScoreConfig& cfg) {
  std::vector<RewardRecord> out;
  for (const RewardExample& ex : examples) {
    RewardRecord record;
    record.id = ex.id;
    record.query = ex.query;
    record.program = ex.program.text;
    record.iteration = ex.iteration;
    record.gold = ex.gold;
    try {
      if (kind == RewardKind::correctness) {
        if (!ex.gold)
          throw FormatError("correctness reward needs a gold answer: " +
                            ex.id);
        dsl::ExecutionOutcome outcome =
            dsl::run_source(ex.program, ex.image, backend, cfg.limits);
        record.raw_reward = correctness_reward(outcome, *ex.gold);
      } else {
        if (ex.suite.empty())
          throw EmptySuite("unit-test reward needs a suite: " + ex.id);
        std::vector<ScoredProgram> scored =
            score_programs({ex.program}, ex.suite, backend, cfg);
        record.raw_reward = viunit_reward(scored.front().aggregate, theta);
      }
    } catch (const BackendUnavailable&) {
      throw;  // infrastructure failure, not a per-record condition
    }
    record.training_weight = std::max(record.raw_reward, 0.0);
    out.push_back(std::move(record));
  }
  return out;
}

void write_reward_jsonl(const std::vector<RewardRecord>& records,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const RewardRecord& r : records) out << r.to_jsonl() << '\n';
}

bool stop_rule(const std::vector<double>& mean_rewards_per_iteration) {
  if (mean_rewards_per_iteration.empty())
    throw EmptyResults("stop rule needs at least one iteration");
  std::size_t n = mean_rewards_per_iteration.size();
  if (n < 2) return false;
  return mean_rewards_per_iteration[n - 1] < mean_rewards_per_iteration[n - 2];
}

}  // namespace viunit
