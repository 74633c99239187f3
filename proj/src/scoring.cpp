#include "viunit/scoring.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace viunit {

double score_test(const dsl::ExecutionOutcome& outcome,
                  const std::string& expected, const ScoreConfig& cfg) {
  switch (outcome.kind) {
    case dsl::OutcomeKind::compile_error:
      return -cfg.compile_penalty;
    case dsl::OutcomeKind::runtime_error:
    case dsl::OutcomeKind::timeout:
      return -cfg.runtime_penalty;
    case dsl::OutcomeKind::answer:
      return normalize_answer(outcome.answer) == normalize_answer(expected)
                 ? 1.0
                 : 0.0;
  }
  return 0.0;
}

double aggregate(const std::vector<double>& scores, const ScoreConfig& cfg) {
  if (scores.empty()) throw EmptySuite("cannot aggregate an empty suite");
  switch (cfg.aggregator) {
    case Aggregator::mean:
      return std::accumulate(scores.begin(), scores.end(), 0.0) /
             static_cast<double>(scores.size());
    case Aggregator::max:
      return *std::max_element(scores.begin(), scores.end());
    case Aggregator::min:
      return *std::min_element(scores.begin(), scores.end());
  }
  throw std::logic_error("unknown aggregator");
}

namespace {

ScoredProgram score_one(const dsl::ProgramSource& program,
                        const std::vector<UnitTest>& suite,
                        PerceptionBackend& backend, const ScoreConfig& cfg) {
  ScoredProgram scored;
  scored.program = program;
  auto parsed = dsl::parse_program(program);
  std::vector<double> scores;
  for (const UnitTest& test : suite) {
    TestResult result;
    result.test = test;
    if (std::holds_alternative<dsl::CompileError>(parsed)) {
      result.outcome.kind = dsl::OutcomeKind::compile_error;
      result.outcome.diagnostic =
          std::get<dsl::CompileError>(parsed).format();
    } else {
      result.outcome =
          dsl::execute(*std::get<std::shared_ptr<dsl::ProgramAst>>(parsed),
                       test.image, backend, cfg.limits);
    }
    result.score = score_test(result.outcome, test.expected, cfg);
    scores.push_back(result.score);
    scored.per_test.push_back(std::move(result));
  }
  scored.aggregate = aggregate(scores, cfg);
  return scored;
}

}  // namespace

std::vector<ScoredProgram> score_programs_serial(
    const std::vector<dsl::ProgramSource>& programs,
    const std::vector<UnitTest>& suite, PerceptionBackend& backend,
    const ScoreConfig& cfg) {
  if (programs.empty()) throw EmptyPool("no programs to score");
  if (suite.empty()) throw EmptySuite("no tests to score against");
  cfg.validate();
  std::vector<ScoredProgram> out;
  out.reserve(programs.size());
  for (const auto& program : programs)
    out.push_back(score_one(program, suite, backend, cfg));
  return out;
}

std::vector<ScoredProgram> score_programs(
    const std::vector<dsl::ProgramSource>& programs,
    const std::vector<UnitTest>& suite, PerceptionBackend& backend,
    const ScoreConfig& cfg) {
  if (programs.empty()) throw EmptyPool("no programs to score");
  if (suite.empty()) throw EmptySuite("no tests to score against");
  cfg.validate();
  std::vector<ScoredProgram> out(programs.size());
#ifdef VIUNIT_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long i = 0; i < static_cast<long>(programs.size()); ++i)
    out[i] = score_one(programs[i], suite, backend, cfg);
  return out;
}

const ScoredProgram& select_best(const std::vector<ScoredProgram>& pool) {
  if (pool.empty()) throw EmptyPool("no scored programs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (pool[i].aggregate > pool[best].aggregate) best = i;
  return pool[best];
}

dsl::ExecutionOutcome most_common_answer(
    const std::vector<dsl::ProgramSource>& pool, const ImageHandle& image,
    PerceptionBackend& backend, const ScoreConfig& cfg) {
  if (pool.empty()) throw EmptyPool("no programs to execute");
  std::vector<dsl::ExecutionOutcome> outcomes;
  for (const auto& program : pool)
    outcomes.push_back(dsl::run_source(program, image, backend, cfg.limits));

  std::map<std::string, int> votes;
  for (const auto& o : outcomes)
    if (o.kind == dsl::OutcomeKind::answer)
      ++votes[normalize_answer(o.answer)];

  if (!votes.empty()) {
    int top = 0;
    for (const auto& [answer, n] : votes) top = std::max(top, n);
    int winners = 0;
    std::string winner;
    for (const auto& [answer, n] : votes)
      if (n == top) {
        ++winners;
        winner = answer;
      }
    if (winners == 1) {
      // Return the earliest outcome carrying the modal answer so elapsed
      // times and original casing survive.
      for (const auto& o : outcomes)
        if (o.kind == dsl::OutcomeKind::answer &&
            normalize_answer(o.answer) == winner)
          return o;
    }
  }
  return outcomes.front();  // tie or all-error: first program's result
}

}  // namespace viunit
