#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::ood {

struct DuqHyperparams {
  double gamma = 0.999;             // EMA factor, gamma = 1 - one_minus_gamma
  std::size_t centroid_size = 64;   // one of {32, 64, 128, 256}
  double penalty = 0.0;             // gradient-penalty weight

  void validate() const;
};

struct DuqTrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t es_patience = 20;
  std::size_t lr_patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_sigma = 0.1;
  double weight_init_std = 0.05;
  std::uint64_t seed = 0;
};

// Radial-basis head on frozen embeddings. Per class c: projection W_c
// (centroid_size x embed_dim), centroid e_c = m_c / N_c maintained by an
// exponential moving average, and a learnable length scale sigma_c stored as
// log sigma_c. Kernel K_c(z) = exp(-|W_c z - e_c|^2 / (2 n sigma_c^2)) with
// n = centroid_size.
class DuqHead {
 public:
  static constexpr double kMinSigma = 1e-4;

  DuqHead() = default;
  DuqHead(std::size_t embed_dim, std::vector<int> class_labels, const DuqHyperparams& hp);

  std::size_t embed_dim() const noexcept { return embed_dim_; }
  std::size_t centroid_size() const noexcept { return hp_.centroid_size; }
  std::size_t n_classes() const noexcept { return labels_.size(); }
  const std::vector<int>& class_labels() const noexcept { return labels_; }
  const DuqHyperparams& hyperparams() const noexcept { return hp_; }

  // Flat trainable parameters: W_0, ..., W_{C-1} (row-major), then log sigma.
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<const double> projection(std::size_t c) const noexcept;
  double sigma(std::size_t c) const noexcept;

  std::span<const double> centroid(std::size_t c) const noexcept;
  double ema_count(std::size_t c) const noexcept { return counts_[c]; }
  std::span<const double> ema_sum(std::size_t c) const noexcept;
  void set_ema(std::size_t c, double count, std::span<const double> sum);

  std::vector<double> kernels(std::span<const double> z) const;

  // Mean over `rows` of sum_c BCE(K_c, 1[y = c]) + penalty (|grad_z sum_c K_c|^2 - 1)^2.
  // `class_index` holds indices into class_labels(). Centroids are constants.
  double loss_and_gradient(const Matrix& z, std::span<const int> class_index,
                           std::span<const std::size_t> rows, std::vector<double>* grad) const;

  // N_c <- gamma N_c + (1 - gamma) |batch_c|, m_c <- gamma m_c + (1 - gamma) sum W_c z_i,
  // e_c = m_c / N_c, for every class.
  void ema_update(const Matrix& z, std::span<const int> class_index,
                  std::span<const std::size_t> rows);

  // Raises log sigma to log(kMinSigma) where needed; returns how many were raised.
  std::size_t clamp_sigmas();

  std::size_t sigma_clamp_count() const noexcept { return sigma_clamps_; }
  void add_sigma_clamps(std::size_t n) noexcept { sigma_clamps_ += n; }

 private:
  void refresh_centroid(std::size_t c);

  std::size_t embed_dim_ = 0;
  std::vector<int> labels_;
  DuqHyperparams hp_;
  std::vector<double> params_;
  std::vector<double> counts_;
  std::vector<double> sums_;       // C x n
  std::vector<double> centroids_;  // C x n
  std::size_t sigma_clamps_ = 0;
};

// Trains W and sigma with Adam on the training embeddings, early-stopped on
// the validation loss with the same plateau schedule as the extractor.
// Centroids start at the projected class means.
DuqHead fit_duq_head(const LabeledSet& train, const LabeledSet& val, const DuqHyperparams& hp,
                     const DuqTrainConfig& cfg);

// -max_c K_c(z); lies in [-1, 0).
double score_duq(const DuqHead& head, std::span<const double> z);

}  // namespace loco::ood
