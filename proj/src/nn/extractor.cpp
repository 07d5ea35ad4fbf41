#include "loco/nn/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loco/error.hpp"
#include "loco/simd/kernels.hpp"

namespace loco::nn {
namespace {

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void normalize(std::span<double> v) {
  double n = std::sqrt(simd::dot(v, v));
  if (n < 1e-300) n = 1e-300;
  for (double& x : v) x /= n;
}

void check_labels(const LabeledSet& set, std::size_t n_classes, const char* name) {
  require(set.size() > 0, ErrorCode::configuration, std::string(name) + " split is empty");
  require(set.x.rows() == set.size(), ErrorCode::input_shape,
          std::string(name) + ": label count differs from row count");
  for (int y : set.y) {
    require(y >= 0 && static_cast<std::size_t>(y) < n_classes, ErrorCode::configuration,
            std::string(name) + ": label out of range");
  }
}

// Draws the dropout mask for one sample and applies it in place.
void apply_dropout(std::span<double> h, double p, Rng& rng, std::vector<double>* mask_out) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  if (mask_out) mask_out->assign(h.size(), keep_scale);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (unit(rng) < p) {
      h[i] = 0.0;
      if (mask_out) (*mask_out)[i] = 0.0;
    } else {
      h[i] *= keep_scale;
    }
  }
}

}  // namespace

void ExtractorConfig::validate() const {
  require(input_dim >= 1 && hidden1_dim >= 1 && embed_dim >= 1, ErrorCode::configuration,
          "extractor dimensions must be >= 1");
  require(n_classes >= 2, ErrorCode::configuration, "extractor needs n_classes >= 2");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorCode::configuration,
          "dropout_p must lie in [0, 1)");
  require(learning_rate > 0.0, ErrorCode::configuration, "learning_rate must be > 0");
  require(batch_size >= 1 && max_epochs >= 1 && es_patience >= 1 && lr_patience >= 1,
          ErrorCode::configuration, "batch size, epochs and patience must be >= 1");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
              adam_eps > 0.0,
          ErrorCode::configuration, "invalid Adam moments");
}

bool ExtractorConfig::same_architecture(const ExtractorConfig& o) const noexcept {
  return input_dim == o.input_dim && hidden1_dim == o.hidden1_dim && embed_dim == o.embed_dim &&
         n_classes == o.n_classes;
}

ForwardOutput Extractor::forward(std::span<const double> x) const {
  ForwardOutput out;
  out.embedding = embed(x, nullptr);
  out.logits = head(out.embedding);
  return out;
}

ForwardOutput Extractor::forward(std::span<const double> x, Rng& rng) const {
  ForwardOutput out;
  out.embedding = embed(x, &rng);
  out.logits = head(out.embedding);
  return out;
}

ExtractorParams::ExtractorParams(std::size_t input, std::size_t hidden1, std::size_t embed,
                                 std::size_t classes)
    : in_(input), h1_(hidden1), emb_(embed), cls_(classes) {
  data_.assign(h1_ * in_ + h1_ + emb_ * h1_ + emb_ + cls_ * emb_ + cls_, 0.0);
}

void SpectralState::iterate(std::span<const double> w, std::size_t rows, std::size_t cols) {
  const auto& k = simd::active();
  std::fill(v.begin(), v.end(), 0.0);
  k.gemv_t(w.data(), rows, cols, u.data(), v.data());
  normalize(v);
  k.gemv(w.data(), rows, cols, v.data(), nullptr, u.data());
  normalize(u);
  sigma = estimate(w, rows, cols);
}

double SpectralState::estimate(std::span<const double> w, std::size_t rows,
                               std::size_t cols) const {
  std::vector<double> wv(rows);
  simd::active().gemv(w.data(), rows, cols, v.data(), nullptr, wv.data());
  return simd::dot(u, wv);
}

SpectralState SpectralState::random(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralState s;
  s.u.resize(rows);
  s.v.resize(cols);
  for (double& x : s.u) x = normal(rng);
  for (double& x : s.v) x = normal(rng);
  normalize(s.u);
  normalize(s.v);
  return s;
}

ExtractorModel::ExtractorModel(const ExtractorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_ = ExtractorParams(cfg.input_dim, cfg.hidden1_dim, cfg.embed_dim, cfg.n_classes);
  Rng rng(cfg.seed);
  auto init = [&rng](std::span<double> block, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : block) x = dist(rng);
  };
  init(params_.w1(), cfg.input_dim);
  init(params_.b1(), cfg.input_dim);
  init(params_.w2(), cfg.hidden1_dim);
  init(params_.b2(), cfg.hidden1_dim);
  init(params_.w3(), cfg.embed_dim);
  init(params_.b3(), cfg.embed_dim);
  spectral_ = SpectralState::random(cfg.embed_dim, cfg.hidden1_dim, rng);
  spectral_.iterate(params_.w2(), cfg.embed_dim, cfg.hidden1_dim);
  rebuild_normalized();
}

void ExtractorModel::set_state(ExtractorParams params, SpectralState spectral) {
  require(params.input_dim() == cfg_.input_dim && params.hidden1_dim() == cfg_.hidden1_dim &&
              params.embed_dim() == cfg_.embed_dim && params.n_classes() == cfg_.n_classes,
          ErrorCode::input_shape, "parameter shapes do not match the model config");
  params_ = std::move(params);
  spectral_ = std::move(spectral);
  rebuild_normalized();
}

void ExtractorModel::rebuild_normalized() {
  spectral_.sigma = spectral_.estimate(params_.w2(), cfg_.embed_dim, cfg_.hidden1_dim);
  require(std::isfinite(spectral_.sigma) && spectral_.sigma > 0.0, ErrorCode::numerical,
          "spectral norm estimate is not positive");
  const auto w2 = params_.w2();
  w2_eff_.resize(w2.size());
  for (std::size_t i = 0; i < w2.size(); ++i) w2_eff_[i] = w2[i] / spectral_.sigma;
}

std::vector<double> ExtractorModel::embed(std::span<const double> x, Rng* rng) const {
  require(x.size() == cfg_.input_dim, ErrorCode::input_shape, "input length mismatch");
  for (double v : x) require(std::isfinite(v), ErrorCode::validation, "non-finite input");
  const auto& k = simd::active();
  std::vector<double> h(cfg_.hidden1_dim);
  k.gemv(params_.w1().data(), cfg_.hidden1_dim, cfg_.input_dim, x.data(), params_.b1().data(),
         h.data());
  relu_inplace(h);
  if (rng != nullptr && cfg_.dropout_p > 0.0) apply_dropout(h, cfg_.dropout_p, *rng, nullptr);
  std::vector<double> e(cfg_.embed_dim);
  k.gemv(w2_eff_.data(), cfg_.embed_dim, cfg_.hidden1_dim, h.data(), params_.b2().data(),
         e.data());
  relu_inplace(e);
  return e;
}

std::vector<double> ExtractorModel::head(std::span<const double> embedding) const {
  require(embedding.size() == cfg_.embed_dim, ErrorCode::input_shape, "embedding length mismatch");
  std::vector<double> logits(cfg_.n_classes);
  simd::active().gemv(params_.w3().data(), cfg_.n_classes, cfg_.embed_dim, embedding.data(),
                      params_.b3().data(), logits.data());
  return logits;
}

double ExtractorModel::loss_and_gradient(const LabeledSet& batch,
                                         std::span<const std::size_t> rows,
                                         ExtractorParams* grad, Rng* rng) const {
  require(!rows.empty(), ErrorCode::configuration, "empty batch");
  const auto& k = simd::active();
  const std::size_t in = cfg_.input_dim, h1 = cfg_.hidden1_dim, emb = cfg_.embed_dim,
                    cls = cfg_.n_classes;
  const double inv_b = 1.0 / static_cast<double>(rows.size());

  std::vector<double> a1(h1), d(h1), mask, a2(emb), e(emb), logits(cls);
  std::vector<double> dlogits(cls), de(emb), dd(h1);
  // Accumulated with respect to the normalized weight; mapped back below.
  std::vector<double> g_w2eff;
  if (grad != nullptr) {
    *grad = ExtractorParams(in, h1, emb, cls);
    g_w2eff.assign(emb * h1, 0.0);
  }

  double total = 0.0;
  for (std::size_t r : rows) {
    const auto x = batch.x.row(r);
    const int y = batch.y[r];
    k.gemv(params_.w1().data(), h1, in, x.data(), params_.b1().data(), a1.data());
    for (std::size_t i = 0; i < h1; ++i) d[i] = a1[i] > 0.0 ? a1[i] : 0.0;
    const bool dropout = rng != nullptr && cfg_.dropout_p > 0.0;
    if (dropout) apply_dropout(d, cfg_.dropout_p, *rng, &mask);
    k.gemv(w2_eff_.data(), emb, h1, d.data(), params_.b2().data(), a2.data());
    for (std::size_t i = 0; i < emb; ++i) e[i] = a2[i] > 0.0 ? a2[i] : 0.0;
    k.gemv(params_.w3().data(), cls, emb, e.data(), params_.b3().data(), logits.data());

    // No validation here: a diverging model must surface as a non-finite loss.
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    total += lse - logits[static_cast<std::size_t>(y)];
    if (grad == nullptr) continue;

    for (std::size_t c = 0; c < cls; ++c) dlogits[c] = std::exp(logits[c] - lse) * inv_b;
    dlogits[static_cast<std::size_t>(y)] -= inv_b;

    k.rank1(1.0, dlogits.data(), cls, e.data(), emb, grad->w3().data());
    k.axpy(1.0, dlogits.data(), grad->b3().data(), cls);

    std::fill(de.begin(), de.end(), 0.0);
    k.gemv_t(params_.w3().data(), cls, emb, dlogits.data(), de.data());
    for (std::size_t i = 0; i < emb; ++i) de[i] = a2[i] > 0.0 ? de[i] : 0.0;
    k.rank1(1.0, de.data(), emb, d.data(), h1, g_w2eff.data());
    k.axpy(1.0, de.data(), grad->b2().data(), emb);

    std::fill(dd.begin(), dd.end(), 0.0);
    k.gemv_t(w2_eff_.data(), emb, h1, de.data(), dd.data());
    for (std::size_t i = 0; i < h1; ++i) {
      double g = a1[i] > 0.0 ? dd[i] : 0.0;
      if (dropout) g *= mask[i];
      dd[i] = g;
    }
    k.rank1(1.0, dd.data(), h1, x.data(), in, grad->w1().data());
    k.axpy(1.0, dd.data(), grad->b1().data(), h1);
  }

  if (grad != nullptr) {
    // W_eff = W / sigma with sigma = u^T W v:
    // dL/dW = (G - <G, W_eff> u v^T) / sigma
    const double inner = k.dot(g_w2eff.data(), w2_eff_.data(), g_w2eff.size());
    auto gw2 = grad->w2();
    std::copy(g_w2eff.begin(), g_w2eff.end(), gw2.begin());
    k.rank1(-inner, spectral_.u.data(), emb, spectral_.v.data(), h1, gw2.data());
    for (double& g : gw2) g /= spectral_.sigma;
  }
  return total * inv_b;
}

double ExtractorModel::mean_loss(const LabeledSet& data) const {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_gradient(data, rows, nullptr, nullptr);
}

PlateauSchedule::Step PlateauSchedule::observe(double val_loss) {
  Step step;
  if (!seen_ || val_loss < best_) {
    seen_ = true;
    best_ = val_loss;
    bad_epochs_ = 0;
    bad_since_halving_ = 0;
    step.improved = true;
    return step;
  }
  ++bad_epochs_;
  ++bad_since_halving_;
  if (bad_since_halving_ >= lr_patience_) {
    step.halve_lr = true;
    bad_since_halving_ = 0;
  }
  step.stop = bad_epochs_ >= es_patience_;
  return step;
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  pow1_ *= beta1_;
  pow2_ *= beta2_;
  const double c1 = 1.0 - pow1_;
  const double c2 = 1.0 - pow2_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

ExtractorModel train_extractor(const LabeledSet& train, const LabeledSet& val,
                               const ExtractorConfig& cfg) {
  cfg.validate();
  check_labels(train, cfg.n_classes, "train");
  check_labels(val, cfg.n_classes, "validation");
  require(train.dim() == cfg.input_dim && val.dim() == cfg.input_dim, ErrorCode::input_shape,
          "training data width differs from input_dim");

  ExtractorModel model(cfg);
  // Separate streams so that the dropout draws do not shift the shuffles.
  Rng shuffle_rng(cfg.seed ^ 0x5bd1e995ULL);
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  ExtractorParams params = model.params();
  SpectralState spectral = model.spectral();
  ExtractorParams best_params = params;
  SpectralState best_spectral = spectral;
  Adam adam(params.flat().size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  PlateauSchedule schedule(cfg.es_patience, cfg.lr_patience);
  TrainingLog log;
  double lr = cfg.learning_rate;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ExtractorParams grad;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      spectral.iterate(params.w2(), cfg.embed_dim, cfg.hidden1_dim);
      try {
        model.set_state(params, spectral);
      } catch (const Error&) {
        fail(ErrorCode::training_divergence,
             "degenerate penultimate weight at epoch " + std::to_string(epoch));
      }
      const double loss = model.loss_and_gradient(train, rows, &grad, &dropout_rng);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::training_divergence,
             "non-finite training loss at epoch " + std::to_string(epoch));
      }
      train_loss += loss * static_cast<double>(rows.size());
      adam.step(params.flat(), grad.flat(), lr);
    }
    train_loss /= static_cast<double>(order.size());

    try {
      model.set_state(params, spectral);
    } catch (const Error&) {
      fail(ErrorCode::training_divergence,
           "degenerate penultimate weight at epoch " + std::to_string(epoch));
    }
    const double val_loss = model.mean_loss(val);
    if (!std::isfinite(val_loss)) {
      fail(ErrorCode::training_divergence,
           "non-finite validation loss at epoch " + std::to_string(epoch));
    }
    log.epochs.push_back({train_loss, val_loss, lr});

    const auto step = schedule.observe(val_loss);
    if (step.improved) {
      best_params = params;
      best_spectral = spectral;
      log.best_epoch = epoch;
    }
    if (step.halve_lr) lr *= 0.5;
    if (step.stop) break;
  }

  // Converge the power vectors on the kept weights so the stored effective
  // weight has unit top singular value.
  for (int it = 0; it < 500; ++it) {
    const double before = best_spectral.sigma;
    best_spectral.iterate(best_params.w2(), cfg.embed_dim, cfg.hidden1_dim);
    if (std::abs(best_spectral.sigma - before) <= 1e-12 * std::abs(best_spectral.sigma)) break;
  }
  model.set_state(std::move(best_params), std::move(best_spectral));
  model.set_training_log(std::move(log));
  return model;
}

}  // namespace loco::nn
