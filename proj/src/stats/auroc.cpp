#include "loco/stats/auroc.hpp"

#include <cmath>

#include "loco/error.hpp"
#include "loco/stats/rank.hpp"

namespace loco::stats {

double auroc(std::span<const ScoredSample> samples) {
  std::vector<double> scores;
  scores.reserve(samples.size());
  std::size_t n_ood = 0;
  for (const auto& s : samples) {
    require(std::isfinite(s.score), ErrorCode::metric, "non-finite score");
    scores.push_back(s.score);
    if (s.is_ood) ++n_ood;
  }
  const std::size_t n_id = samples.size() - n_ood;
  require(n_ood > 0 && n_id > 0, ErrorCode::metric, "AUROC needs both OOD and ID samples");

  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].is_ood) rank_sum += ranks[i];
  }
  const double a = static_cast<double>(n_ood);
  const double u = rank_sum - a * (a + 1.0) / 2.0;
  const double pairs = a * static_cast<double>(n_id);
  // u and pairs - u are exact half-integers. Dividing the larger one and
  // subtracting from 1 for the other side keeps a -> 1 - a exact under label
  // flipping (subtraction within [0.5, 1] is exact).
  if (2.0 * u >= pairs) return u / pairs;
  return 1.0 - (pairs - u) / pairs;
}

double auroc(std::span<const double> ood_scores, std::span<const double> id_scores) {
  std::vector<ScoredSample> samples;
  samples.reserve(ood_scores.size() + id_scores.size());
  for (double s : ood_scores) samples.push_back({s, true});
  for (double s : id_scores) samples.push_back({s, false});
  return auroc(samples);
}

double macro_ovr_auroc(const Matrix& class_scores, std::span<const int> labels) {
  require(class_scores.rows() == labels.size(), ErrorCode::metric,
          "score rows differ from label count");
  double total = 0.0;
  std::size_t used = 0;
  std::vector<ScoredSample> samples(labels.size());
  for (std::size_t c = 0; c < class_scores.cols(); ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pos = labels[i] == static_cast<int>(c);
      positives += pos ? 1 : 0;
      samples[i] = {class_scores(i, c), pos};
    }
    if (positives == 0 || positives == labels.size()) continue;
    total += auroc(samples);
    ++used;
  }
  require(used > 0, ErrorCode::metric, "no class has both positive and negative samples");
  return total / static_cast<double>(used);
}

}  // namespace loco::stats
