#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::nn {

using Rng = std::mt19937_64;

struct ExtractorConfig {
  std::size_t input_dim = 0;
  std::size_t hidden1_dim = 64;
  std::size_t embed_dim = 32;
  std::size_t n_classes = 2;
  double dropout_p = 0.25;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t es_patience = 20;
  std::size_t lr_patience = 5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  bool same_architecture(const ExtractorConfig& other) const noexcept;
};

struct ForwardOutput {
  std::vector<double> logits;
  std::vector<double> embedding;
};

// What the scorers need from a trained classifier: a penultimate embedding
// (optionally with dropout active) and the final linear readout. A
// convolutional extractor can implement this in place of the dense one.
class Extractor {
 public:
  virtual ~Extractor() = default;

  virtual std::size_t input_dim() const noexcept = 0;
  virtual std::size_t embed_dim() const noexcept = 0;
  virtual std::size_t n_classes() const noexcept = 0;

  // Deterministic when `rng` is null; otherwise dropout is sampled from it.
  virtual std::vector<double> embed(std::span<const double> x, Rng* rng) const = 0;
  virtual std::vector<double> head(std::span<const double> embedding) const = 0;

  ForwardOutput forward(std::span<const double> x) const;
  ForwardOutput forward(std::span<const double> x, Rng& rng) const;
};

// All trainable tensors in one flat buffer:
// w1 [hidden1 x input], b1, w2 [embed x hidden1] (raw, pre-normalization), b2,
// w3 [classes x embed], b3.
class ExtractorParams {
 public:
  ExtractorParams() = default;
  ExtractorParams(std::size_t input, std::size_t hidden1, std::size_t embed, std::size_t classes);

  std::size_t input_dim() const noexcept { return in_; }
  std::size_t hidden1_dim() const noexcept { return h1_; }
  std::size_t embed_dim() const noexcept { return emb_; }
  std::size_t n_classes() const noexcept { return cls_; }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  std::span<double> w1() noexcept { return block(0, h1_ * in_); }
  std::span<double> b1() noexcept { return block(off_b1(), h1_); }
  std::span<double> w2() noexcept { return block(off_w2(), emb_ * h1_); }
  std::span<double> b2() noexcept { return block(off_b2(), emb_); }
  std::span<double> w3() noexcept { return block(off_w3(), cls_ * emb_); }
  std::span<double> b3() noexcept { return block(off_b3(), cls_); }
  std::span<const double> w1() const noexcept { return block(0, h1_ * in_); }
  std::span<const double> b1() const noexcept { return block(off_b1(), h1_); }
  std::span<const double> w2() const noexcept { return block(off_w2(), emb_ * h1_); }
  std::span<const double> b2() const noexcept { return block(off_b2(), emb_); }
  std::span<const double> w3() const noexcept { return block(off_w3(), cls_ * emb_); }
  std::span<const double> b3() const noexcept { return block(off_b3(), cls_); }

  bool operator==(const ExtractorParams&) const = default;

 private:
  std::size_t off_b1() const noexcept { return h1_ * in_; }
  std::size_t off_w2() const noexcept { return off_b1() + h1_; }
  std::size_t off_b2() const noexcept { return off_w2() + emb_ * h1_; }
  std::size_t off_w3() const noexcept { return off_b2() + emb_; }
  std::size_t off_b3() const noexcept { return off_w3() + cls_ * emb_; }
  std::span<double> block(std::size_t off, std::size_t n) noexcept { return {data_.data() + off, n}; }
  std::span<const double> block(std::size_t off, std::size_t n) const noexcept {
    return {data_.data() + off, n};
  }

  std::size_t in_ = 0, h1_ = 0, emb_ = 0, cls_ = 0;
  std::vector<double> data_;
};

// Power-iteration state for the spectrally normalized penultimate weight.
// `u` spans the output side (embed_dim), `v` the input side (hidden1_dim).
struct SpectralState {
  std::vector<double> u;
  std::vector<double> v;
  double sigma = 1.0;

  // One power-iteration step on `w` (rows x cols); refreshes sigma = u^T W v.
  void iterate(std::span<const double> w, std::size_t rows, std::size_t cols);
  double estimate(std::span<const double> w, std::size_t rows, std::size_t cols) const;

  static SpectralState random(std::size_t rows, std::size_t cols, Rng& rng);
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
};

// flatten -> dense(hidden1) -> relu -> dropout -> spectral-normalized
// dense(embed) -> relu -> dense(logits)
class ExtractorModel final : public Extractor {
 public:
  ExtractorModel() = default;
  // Freshly initialized weights (uniform +-1/sqrt(fan_in)) from cfg.seed.
  explicit ExtractorModel(const ExtractorConfig& cfg);

  std::size_t input_dim() const noexcept override { return params_.input_dim(); }
  std::size_t embed_dim() const noexcept override { return params_.embed_dim(); }
  std::size_t n_classes() const noexcept override { return params_.n_classes(); }

  std::vector<double> embed(std::span<const double> x, Rng* rng) const override;
  std::vector<double> head(std::span<const double> embedding) const override;

  const ExtractorConfig& config() const noexcept { return cfg_; }
  const ExtractorParams& params() const noexcept { return params_; }
  const SpectralState& spectral() const noexcept { return spectral_; }
  const TrainingLog& training_log() const noexcept { return log_; }

  // Replaces weights and power vectors and rebuilds the normalized weight.
  void set_state(ExtractorParams params, SpectralState spectral);
  void set_training_log(TrainingLog log) { log_ = std::move(log); }

  // The effective penultimate weight W2 / sigma.
  std::span<const double> normalized_w2() const noexcept { return w2_eff_; }

  // Mean cross-entropy over `rows` of `batch` and, when `grad` is non-null,
  // its analytic gradient w.r.t. every parameter (the power vectors are held
  // fixed). Dropout masks are drawn from `rng` when non-null.
  double loss_and_gradient(const LabeledSet& batch, std::span<const std::size_t> rows,
                           ExtractorParams* grad, Rng* rng) const;

  double mean_loss(const LabeledSet& data) const;

 private:
  void rebuild_normalized();

  ExtractorConfig cfg_;
  ExtractorParams params_;
  SpectralState spectral_;
  std::vector<double> w2_eff_;
  TrainingLog log_;
};

// Tracks validation loss for early stopping and learning-rate halving. An
// epoch is an improvement only when its loss is strictly below the best so
// far; halving fires every `lr_patience` consecutive non-improving epochs and
// stopping after `es_patience`.
class PlateauSchedule {
 public:
  PlateauSchedule(std::size_t es_patience, std::size_t lr_patience)
      : es_patience_(es_patience), lr_patience_(lr_patience) {}

  struct Step {
    bool improved = false;
    bool halve_lr = false;
    bool stop = false;
  };

  Step observe(double val_loss);
  double best() const noexcept { return best_; }

 private:
  std::size_t es_patience_;
  std::size_t lr_patience_;
  double best_ = 0.0;
  bool seen_ = false;
  std::size_t bad_epochs_ = 0;
  std::size_t bad_since_halving_ = 0;
};

// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double beta1, double beta2, double eps)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  double pow1_ = 1.0, pow2_ = 1.0;
};

// Mini-batch training with the validation-loss plateau schedule; returns the
// weights of the epoch with the lowest validation loss.
ExtractorModel train_extractor(const LabeledSet& train, const LabeledSet& val,
                               const ExtractorConfig& cfg);

}  // namespace loco::nn
