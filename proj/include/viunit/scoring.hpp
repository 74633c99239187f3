#pragma once

#include <string>
#include <vector>

#include "viunit/dsl/program.hpp"
#include "viunit/testgen.hpp"
#include "viunit/text.hpp"

namespace viunit {

enum class Aggregator { mean, max, min };

struct ScoreConfig {
  double runtime_penalty = 0.1;
  double compile_penalty = 0.1;
  Aggregator aggregator = Aggregator::mean;
  dsl::ExecutionLimits limits;

  void validate() const {
    if (runtime_penalty < 0 || compile_penalty < 0)
      throw std::invalid_argument("penalties must be >= 0");
  }
};

struct TestResult {
  UnitTest test;
  dsl::ExecutionOutcome outcome;
  double score = 0;
};

struct ScoredProgram {
  dsl::ProgramSource program;
  std::vector<TestResult> per_test;
  double aggregate = 0;
};

// Per-test score: -compile_penalty on compile errors, -runtime_penalty on
// runtime errors and timeouts, else exact-match indicator after answer
// normalization.
double score_test(const dsl::ExecutionOutcome& outcome,
                  const std::string& expected, const ScoreConfig& cfg);

double aggregate(const std::vector<double>& scores, const ScoreConfig& cfg);

// Runs every program against the whole suite. Parallel over (program, test)
// pairs when built with OpenMP; score_programs_serial is the reference.
std::vector<ScoredProgram> score_programs(
    const std::vector<dsl::ProgramSource>& programs,
    const std::vector<UnitTest>& suite, PerceptionBackend& backend,
    const ScoreConfig& cfg);

std::vector<ScoredProgram> score_programs_serial(
    const std::vector<dsl::ProgramSource>& programs,
    const std::vector<UnitTest>& suite, PerceptionBackend& backend,
    const ScoreConfig& cfg);

// Argmax of the aggregate, ties to the lowest program index.
const ScoredProgram& select_best(const std::vector<ScoredProgram>& pool);

// Executes every program on the image; modal normalized answer among
// non-error outcomes, falling back to the first program's outcome on ties or
// all-error pools.
dsl::ExecutionOutcome most_common_answer(
    const std::vector<dsl::ProgramSource>& pool, const ImageHandle& image,
    PerceptionBackend& backend, const ScoreConfig& cfg = {});

}  // namespace viunit
