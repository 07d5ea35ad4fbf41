#pragma once

#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::stats {

struct ScoredSample {
  double score = 0.0;
  bool is_ood = false;
};

// Probability that a random OOD sample outscores a random ID sample, ties
// counting one half. OOD is the positive class. O(n log n) via average ranks.
double auroc(std::span<const ScoredSample> samples);
double auroc(std::span<const double> ood_scores, std::span<const double> id_scores);

// Mean over classes of the one-vs-rest AUROC of column c of `class_scores`
// against label == c. Classes absent from `labels` (or covering every row)
// are skipped; throws metric error when none remain.
double macro_ovr_auroc(const Matrix& class_scores, std::span<const int> labels);

}  // namespace loco::stats
