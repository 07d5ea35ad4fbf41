#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "loco/nn/extractor.hpp"
#include "loco/ood/react.hpp"

// Scorers that read the classifier output. Every score follows one
// convention: higher means more likely out-of-distribution.

namespace loco::ood {

enum class SoftmaxStatistic { entropy, one_minus_max };

SoftmaxStatistic parse_softmax_statistic(std::string_view name);
std::string_view to_string(SoftmaxStatistic s) noexcept;

struct ScorerConfig {
  std::size_t mc_passes = 50;
  std::size_t ensemble_size = 5;
  double energy_temperature = 1.0;
  std::size_t dknn_k = 1;
  double react_percentile = 90.0;
  SoftmaxStatistic softmax_statistic = SoftmaxStatistic::entropy;

  void validate() const;
};

double score_softmax(std::span<const double> logits,
                     SoftmaxStatistic statistic = SoftmaxStatistic::entropy);

// -T log sum_k exp(logit_k / T).
double score_energy(std::span<const double> logits, double temperature = 1.0);

// Logits recomputed from the (optionally clamped) embedding. `rng` switches
// dropout on; `react` may be null.
std::vector<double> logits_for(const nn::Extractor& model, std::span<const double> x,
                               nn::Rng* rng, const ReactState* react);

// Running mean of `passes` stochastic softmax vectors. The running-mean update
// leaves identical passes bit-exact.
std::vector<double> mc_dropout_probabilities(const nn::Extractor& model,
                                             std::span<const double> x, std::size_t passes,
                                             nn::Rng& rng, const ReactState* react = nullptr);
double score_mc_dropout(const nn::Extractor& model, std::span<const double> x,
                        std::size_t passes, nn::Rng& rng, const ReactState* react = nullptr);

// Mean of the members' deterministic softmax vectors. Members must agree on
// input, embedding and class dimensions.
std::vector<double> ensemble_probabilities(std::span<const nn::Extractor* const> members,
                                           std::span<const double> x,
                                           const ReactState* react = nullptr);
// Same, with each member clamped by its own ReAct state.
std::vector<double> ensemble_probabilities(std::span<const nn::Extractor* const> members,
                                           std::span<const double> x,
                                           std::span<const ReactState> per_member);
double score_ensemble(std::span<const nn::Extractor* const> members, std::span<const double> x,
                      const ReactState* react = nullptr);

// Incremental mean of probability vectors, m += (p - m) / k.
std::vector<double> running_mean(std::span<const std::vector<double>> vectors);

}  // namespace loco::ood
