#include "viunit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "viunit/text.hpp"

namespace viunit {

double euclidean_distance(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double s = 0;
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  for (std::size_t i = n; i < a.size(); ++i) s += a[i] * a[i];
  for (std::size_t i = n; i < b.size(); ++i) s += b[i] * b[i];
  return std::sqrt(s);
}

std::vector<CandidateTest> sample(const std::vector<CandidateTest>& candidates,
                                  const SampleSpec& spec, Embedder& embedder) {
  if (candidates.empty()) throw EmptyPool("candidate pool is empty");
  if (spec.k < 1) throw std::invalid_argument("k must be >= 1");
  if (candidates.size() <= spec.k) return candidates;

  std::vector<std::size_t> selected;
  std::vector<bool> taken(candidates.size(), false);

  if (spec.strategy == SampleStrategy::by_answer ||
      spec.strategy == SampleStrategy::answer_then_input) {
    // One earliest candidate per distinct answer, first-appearance order.
    std::set<std::string> answers_seen;
    for (std::size_t i = 0; i < candidates.size() && selected.size() < spec.k;
         ++i) {
      if (answers_seen.insert(normalize_answer(candidates[i].expected))
              .second) {
        selected.push_back(i);
        taken[i] = true;
      }
    }
  } else {
    selected.push_back(0);
    taken[0] = true;
  }

  if (selected.size() < spec.k) {
    std::vector<std::vector<double>> emb(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
      emb[i] = embedder.embed(candidates[i].caption);

    while (selected.size() < spec.k) {
      std::size_t best = candidates.size();
      double best_score = -1;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (taken[i]) continue;
        double score = 0;
        for (std::size_t j : selected)
          score = std::max(score, euclidean_distance(emb[i], emb[j]));
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      selected.push_back(best);
      taken[best] = true;
    }
  }

  std::vector<CandidateTest> out;
  out.reserve(selected.size());
  for (std::size_t i : selected) out.push_back(candidates[i]);
  return out;
}

double input_diversity_score(const std::vector<CandidateTest>& selected,
                             Embedder& embedder) {
  if (selected.size() < 2)
    throw TooFewItems("input diversity needs at least two tests");
  std::vector<std::vector<double>> emb(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i)
    emb[i] = embedder.embed(selected[i].caption);
  double best = 0;
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t j = i + 1; j < emb.size(); ++j)
      best = std::max(best, euclidean_distance(emb[i], emb[j]));
  return best;
}

}  // namespace viunit
