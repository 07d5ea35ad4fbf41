#include "loco/ood/logit_scorers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loco/error.hpp"
#include "loco/nn/functional.hpp"

namespace loco::ood {
namespace {

void accumulate_mean(std::vector<double>& mean, std::span<const double> p, std::size_t k) {
  const double inv = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (p[i] - mean[i]) * inv;
}

}  // namespace

SoftmaxStatistic parse_softmax_statistic(std::string_view name) {
  if (name == "entropy") return SoftmaxStatistic::entropy;
  if (name == "one_minus_max") return SoftmaxStatistic::one_minus_max;
  fail(ErrorCode::configuration, "unknown softmax statistic '" + std::string(name) + "'");
}

std::string_view to_string(SoftmaxStatistic s) noexcept {
  return s == SoftmaxStatistic::entropy ? "entropy" : "one_minus_max";
}

void ScorerConfig::validate() const {
  require(mc_passes >= 1, ErrorCode::configuration, "mc_passes must be >= 1");
  require(ensemble_size >= 1, ErrorCode::configuration, "ensemble_size must be >= 1");
  require(energy_temperature > 0.0, ErrorCode::configuration, "energy temperature must be > 0");
  require(dknn_k >= 1, ErrorCode::configuration, "dknn_k must be >= 1");
  require(react_percentile > 0.0 && react_percentile <= 100.0, ErrorCode::configuration,
          "react percentile must lie in (0, 100]");
}

double score_softmax(std::span<const double> logits, SoftmaxStatistic statistic) {
  const auto p = nn::softmax(logits);
  if (statistic == SoftmaxStatistic::one_minus_max) {
    return 1.0 - *std::max_element(p.begin(), p.end());
  }
  return nn::entropy(p);
}

double score_energy(std::span<const double> logits, double temperature) {
  require(temperature > 0.0, ErrorCode::validation, "energy temperature must be > 0");
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& v : scaled) v /= temperature;
  return -temperature * nn::log_sum_exp(scaled);
}

std::vector<double> logits_for(const nn::Extractor& model, std::span<const double> x,
                               nn::Rng* rng, const ReactState* react) {
  auto e = model.embed(x, rng);
  if (react != nullptr) react->apply(e);
  return model.head(e);
}

std::vector<double> running_mean(std::span<const std::vector<double>> vectors) {
  require(!vectors.empty(), ErrorCode::validation, "mean of no vectors");
  std::vector<double> mean(vectors.front().size(), 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    require(vectors[k].size() == mean.size(), ErrorCode::input_shape, "vector length mismatch");
    accumulate_mean(mean, vectors[k], k + 1);
  }
  return mean;
}

std::vector<double> mc_dropout_probabilities(const nn::Extractor& model,
                                             std::span<const double> x, std::size_t passes,
                                             nn::Rng& rng, const ReactState* react) {
  require(passes >= 1, ErrorCode::configuration, "MC dropout needs at least one pass");
  std::vector<double> mean(model.n_classes(), 0.0);
  for (std::size_t t = 1; t <= passes; ++t) {
    const auto p = nn::softmax(logits_for(model, x, &rng, react));
    accumulate_mean(mean, p, t);
  }
  return mean;
}

double score_mc_dropout(const nn::Extractor& model, std::span<const double> x,
                        std::size_t passes, nn::Rng& rng, const ReactState* react) {
  return nn::entropy(mc_dropout_probabilities(model, x, passes, rng, react));
}

namespace {

std::vector<double> ensemble_mean(std::span<const nn::Extractor* const> members,
                                  std::span<const double> x, const ReactState* shared,
                                  std::span<const ReactState> per_member) {
  require(!members.empty(), ErrorCode::configuration, "ensemble has no members");
  require(per_member.empty() || per_member.size() == members.size(), ErrorCode::configuration,
          "one ReAct state per ensemble member expected");
  const auto* first = members.front();
  std::vector<double> mean(first->n_classes(), 0.0);
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto* model = members[m];
    require(model->input_dim() == first->input_dim() && model->embed_dim() == first->embed_dim() &&
                model->n_classes() == first->n_classes(),
            ErrorCode::configuration, "ensemble members differ in architecture");
    const ReactState* react = per_member.empty() ? shared : &per_member[m];
    const auto p = nn::softmax(logits_for(*model, x, nullptr, react));
    accumulate_mean(mean, p, m + 1);
  }
  return mean;
}

}  // namespace

std::vector<double> ensemble_probabilities(std::span<const nn::Extractor* const> members,
                                           std::span<const double> x,
                                           const ReactState* react) {
  return ensemble_mean(members, x, react, {});
}

std::vector<double> ensemble_probabilities(std::span<const nn::Extractor* const> members,
                                           std::span<const double> x,
                                           std::span<const ReactState> per_member) {
  return ensemble_mean(members, x, nullptr, per_member);
}

double score_ensemble(std::span<const nn::Extractor* const> members, std::span<const double> x,
                      const ReactState* react) {
  return nn::entropy(ensemble_probabilities(members, x, react));
}

}  // namespace loco::ood
