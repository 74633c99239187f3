#pragma once

#include <vector>

#include "viunit/services.hpp"
#include "viunit/testgen.hpp"

namespace viunit {

enum class SampleStrategy { by_answer, by_input, answer_then_input };

struct SampleSpec {
  std::size_t k = 5;
  SampleStrategy strategy = SampleStrategy::answer_then_input;
};

// Picks min(k, |candidates|) tests. Answer pass: one earliest candidate per
// distinct normalized answer in first-appearance order. Growth: repeatedly
// add the candidate maximizing the MAXIMUM distance to any selected
// embedding, ties to the lowest index.
std::vector<CandidateTest> sample(const std::vector<CandidateTest>& candidates,
                                  const SampleSpec& spec, Embedder& embedder);

// Maximum pairwise Euclidean distance between caption embeddings.
double input_diversity_score(const std::vector<CandidateTest>& selected,
                             Embedder& embedder);

double euclidean_distance(const std::vector<double>& a,
                          const std::vector<double>& b);

}  // namespace viunit
