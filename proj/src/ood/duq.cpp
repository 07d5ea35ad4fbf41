#include "loco/ood/duq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "loco/error.hpp"
#include "loco/nn/extractor.hpp"
#include "loco/simd/kernels.hpp"

namespace loco::ood {
namespace {

constexpr double kBceFloor = 1e-12;

std::vector<int> index_labels(std::span<const int> labels, const std::vector<int>& classes,
                              const char* split) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), labels[i]);
    require(it != classes.end() && *it == labels[i], ErrorCode::configuration,
            std::string("DUQ: ") + split + " label " + std::to_string(labels[i]) +
                " is not a training class");
    out[i] = static_cast<int>(it - classes.begin());
  }
  return out;
}

}  // namespace

void DuqHyperparams::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, ErrorCode::configuration, "DUQ gamma must lie in (0, 1]");
  require(centroid_size >= 1, ErrorCode::configuration, "DUQ centroid size must be >= 1");
  require(penalty >= 0.0, ErrorCode::configuration, "DUQ penalty must be >= 0");
}

DuqHead::DuqHead(std::size_t embed_dim, std::vector<int> class_labels, const DuqHyperparams& hp)
    : embed_dim_(embed_dim), labels_(std::move(class_labels)), hp_(hp) {
  hp_.validate();
  require(embed_dim_ >= 1 && !labels_.empty(), ErrorCode::configuration,
          "DUQ head needs a positive embedding size and at least one class");
  const std::size_t n = hp_.centroid_size, c = labels_.size();
  params_.assign(c * n * embed_dim_ + c, 0.0);
  counts_.assign(c, 1.0);
  sums_.assign(c * n, 0.0);
  centroids_.assign(c * n, 0.0);
}

std::span<const double> DuqHead::projection(std::size_t c) const noexcept {
  const std::size_t block = hp_.centroid_size * embed_dim_;
  return {params_.data() + c * block, block};
}

double DuqHead::sigma(std::size_t c) const noexcept {
  return std::exp(params_[labels_.size() * hp_.centroid_size * embed_dim_ + c]);
}

std::span<const double> DuqHead::centroid(std::size_t c) const noexcept {
  return {centroids_.data() + c * hp_.centroid_size, hp_.centroid_size};
}

std::span<const double> DuqHead::ema_sum(std::size_t c) const noexcept {
  return {sums_.data() + c * hp_.centroid_size, hp_.centroid_size};
}

void DuqHead::set_ema(std::size_t c, double count, std::span<const double> sum) {
  require(c < labels_.size() && sum.size() == hp_.centroid_size && count > 0.0,
          ErrorCode::configuration, "DUQ: invalid EMA state");
  counts_[c] = count;
  std::copy(sum.begin(), sum.end(), sums_.begin() + static_cast<std::ptrdiff_t>(c * sum.size()));
  refresh_centroid(c);
}

void DuqHead::refresh_centroid(std::size_t c) {
  const std::size_t n = hp_.centroid_size;
  for (std::size_t i = 0; i < n; ++i) centroids_[c * n + i] = sums_[c * n + i] / counts_[c];
}

std::vector<double> DuqHead::kernels(std::span<const double> z) const {
  require(z.size() == embed_dim_, ErrorCode::input_shape, "DUQ: embedding dimension mismatch");
  const std::size_t n = hp_.centroid_size;
  const auto& k = simd::active();
  std::vector<double> proj(n), out(labels_.size());
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    k.gemv(projection(c).data(), n, embed_dim_, z.data(), nullptr, proj.data());
    const double sq = k.squared_distance(proj.data(), centroid(c).data(), n);
    const double s = sigma(c);
    out[c] = std::exp(-sq / (2.0 * static_cast<double>(n) * s * s));
  }
  return out;
}

double DuqHead::loss_and_gradient(const Matrix& z, std::span<const int> class_index,
                                  std::span<const std::size_t> rows,
                                  std::vector<double>* grad) const {
  require(!rows.empty(), ErrorCode::configuration, "DUQ: empty batch");
  require(z.cols() == embed_dim_, ErrorCode::input_shape, "DUQ: embedding dimension mismatch");
  const auto& k = simd::active();
  const std::size_t n = hp_.centroid_size, d = embed_dim_, nc = labels_.size();
  const std::size_t sigma_off = nc * n * d;
  const double lambda = hp_.penalty;
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  if (grad != nullptr) grad->assign(params_.size(), 0.0);

  std::vector<double> a(nc), kern(nc), sq(nc), slope(nc), beta(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    a[c] = std::exp(-2.0 * params_[sigma_off + c]) / static_cast<double>(n);
  }
  std::vector<double> r(nc * n), q(nc * n), g(d), u(d), scaled(n);

  double total = 0.0;
  for (std::size_t row : rows) {
    const auto x = z.row(row);
    const auto y = static_cast<std::size_t>(class_index[row]);
    double loss = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      double* rc = r.data() + c * n;
      k.gemv(projection(c).data(), n, d, x.data(), nullptr, rc);
      const double* e = centroids_.data() + c * n;
      for (std::size_t i = 0; i < n; ++i) rc[i] -= e[i];
      sq[c] = k.dot(rc, rc, n);
      const double expo = 0.5 * a[c] * sq[c];
      kern[c] = std::exp(-expo);
      if (c == y) {
        loss += expo;  // -log K
        slope[c] = 1.0;
      } else {
        const double one_minus = 1.0 - kern[c];
        if (one_minus > kBceFloor) {
          loss -= std::log(one_minus);
          slope[c] = -kern[c] / one_minus;
        } else {
          loss -= std::log(kBceFloor);
          slope[c] = 0.0;
        }
      }
    }

    double gnorm_minus_one = 0.0;
    if (lambda > 0.0) {
      // g = grad_z sum_c K_c = -sum_c a_c K_c W_c^T r_c
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t c = 0; c < nc; ++c) {
        const double w = -a[c] * kern[c];
        for (std::size_t i = 0; i < n; ++i) scaled[i] = w * r[c * n + i];
        k.gemv_t(projection(c).data(), n, d, scaled.data(), g.data());
      }
      gnorm_minus_one = k.dot(g.data(), g.data(), d) - 1.0;
      loss += lambda * gnorm_minus_one * gnorm_minus_one;
    }
    total += loss;
    if (grad == nullptr) continue;

    if (lambda > 0.0) {
      for (std::size_t i = 0; i < d; ++i) u[i] = 4.0 * lambda * gnorm_minus_one * g[i];
      for (std::size_t c = 0; c < nc; ++c) {
        k.gemv(projection(c).data(), n, d, u.data(), nullptr, q.data() + c * n);
        beta[c] = k.dot(r.data() + c * n, q.data() + c * n, n);
      }
    }

    for (std::size_t c = 0; c < nc; ++c) {
      double* gw = grad->data() + c * n * d;
      const double* rc = r.data() + c * n;
      double coef_rz = slope[c] * a[c];
      double d_a = slope[c] * 0.5 * sq[c];
      if (lambda > 0.0) {
        const double ak = a[c] * kern[c];
        coef_rz += a[c] * a[c] * beta[c] * kern[c];
        d_a += kern[c] * beta[c] * (0.5 * a[c] * sq[c] - 1.0);
        k.rank1(-ak * inv_b, rc, n, u.data(), d, gw);
        k.rank1(-ak * inv_b, q.data() + c * n, n, x.data(), d, gw);
      }
      k.rank1(coef_rz * inv_b, rc, n, x.data(), d, gw);
      // a = exp(-2 log sigma) / n
      (*grad)[sigma_off + c] += d_a * (-2.0 * a[c]) * inv_b;
    }
  }
  return total * inv_b;
}

void DuqHead::ema_update(const Matrix& z, std::span<const int> class_index,
                         std::span<const std::size_t> rows) {
  const std::size_t n = hp_.centroid_size, d = embed_dim_, nc = labels_.size();
  const double gamma = hp_.gamma;
  const auto& k = simd::active();
  std::vector<double> batch_sum(nc * n, 0.0), batch_count(nc, 0.0), proj(n);
  for (std::size_t row : rows) {
    const auto c = static_cast<std::size_t>(class_index[row]);
    k.gemv(projection(c).data(), n, d, z.row(row).data(), nullptr, proj.data());
    k.axpy(1.0, proj.data(), batch_sum.data() + c * n, n);
    batch_count[c] += 1.0;
  }
  for (std::size_t c = 0; c < nc; ++c) {
    counts_[c] = gamma * counts_[c] + (1.0 - gamma) * batch_count[c];
    for (std::size_t i = 0; i < n; ++i) {
      sums_[c * n + i] = gamma * sums_[c * n + i] + (1.0 - gamma) * batch_sum[c * n + i];
    }
    refresh_centroid(c);
  }
}

std::size_t DuqHead::clamp_sigmas() {
  const std::size_t off = labels_.size() * hp_.centroid_size * embed_dim_;
  const double floor = std::log(kMinSigma);
  std::size_t raised = 0;
  for (std::size_t c = 0; c < labels_.size(); ++c) {
    if (!(params_[off + c] >= floor)) {
      params_[off + c] = floor;
      ++raised;
    }
  }
  sigma_clamps_ += raised;
  return raised;
}

DuqHead fit_duq_head(const LabeledSet& train, const LabeledSet& val, const DuqHyperparams& hp,
                     const DuqTrainConfig& cfg) {
  hp.validate();
  require(train.size() > 0 && val.size() > 0, ErrorCode::configuration,
          "DUQ: train and validation embeddings must be nonempty");
  require(train.dim() == val.dim(), ErrorCode::input_shape, "DUQ: split widths differ");
  std::vector<int> classes(train.y.begin(), train.y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const auto train_idx = index_labels(train.y, classes, "train");
  const auto val_idx = index_labels(val.y, classes, "validation");

  const std::size_t d = train.dim(), n = hp.centroid_size, nc = classes.size();
  DuqHead head(d, classes, hp);
  nn::Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.weight_init_std);
  auto p = head.params();
  for (std::size_t i = 0; i < nc * n * d; ++i) p[i] = normal(rng);
  for (std::size_t c = 0; c < nc; ++c) p[nc * n * d + c] = std::log(cfg.init_sigma);

  // Start each centroid at the projected class mean.
  {
    const auto& k = simd::active();
    std::vector<double> sums(nc * n, 0.0), counts(nc, 0.0), proj(n);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto c = static_cast<std::size_t>(train_idx[i]);
      k.gemv(head.projection(c).data(), n, d, train.x.row(i).data(), nullptr, proj.data());
      k.axpy(1.0, proj.data(), sums.data() + c * n, n);
      counts[c] += 1.0;
    }
    for (std::size_t c = 0; c < nc; ++c) {
      std::span<double> s(sums.data() + c * n, n);
      for (double& v : s) v /= counts[c];
      head.set_ema(c, 1.0, s);
    }
  }

  nn::Adam adam(head.params().size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  nn::PlateauSchedule schedule(cfg.es_patience, cfg.lr_patience);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> val_rows(val.size());
  std::iota(val_rows.begin(), val_rows.end(), std::size_t{0});
  std::vector<double> grad;
  double lr = cfg.learning_rate;
  DuqHead best = head;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      const double loss = head.loss_and_gradient(train.x, train_idx, rows, &grad);
      if (!std::isfinite(loss)) {
        fail(ErrorCode::training_divergence,
             "DUQ: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam.step(head.params(), grad, lr);
      head.clamp_sigmas();
      head.ema_update(train.x, train_idx, rows);
    }
    const double val_loss = head.loss_and_gradient(val.x, val_idx, val_rows, nullptr);
    if (!std::isfinite(val_loss)) {
      fail(ErrorCode::training_divergence,
           "DUQ: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const auto step = schedule.observe(val_loss);
    if (step.improved) best = head;
    if (step.halve_lr) lr *= 0.5;
    if (step.stop) break;
  }
  best.add_sigma_clamps(head.sigma_clamp_count() - best.sigma_clamp_count());
  return best;
}

double score_duq(const DuqHead& head, std::span<const double> z) {
  const auto k = head.kernels(z);
  return -*std::max_element(k.begin(), k.end());
}

}  // namespace loco::ood
