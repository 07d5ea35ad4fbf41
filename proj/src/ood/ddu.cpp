#include "loco/ood/ddu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "loco/error.hpp"

namespace loco::ood {
namespace {

// Solves L y = b in place (forward substitution).
void forward_solve(const Matrix& l, std::span<double> b) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
}

double component_log_pdf(const GaussianComponent& c, std::span<const double> z) {
  const std::size_t d = z.size();
  std::vector<double> r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = z[i] - c.mean[i];
  forward_solve(c.cholesky, r);
  double q = 0.0;
  for (double v : r) q += v * v;
  return -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + c.log_det + q);
}

}  // namespace

bool cholesky_lower(Matrix& a, double rel_tol) {
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double floor = rel_tol * std::max(max_diag, 1e-300);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > floor) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
  return true;
}

double GdaModel::log_density(std::span<const double> z) const {
  require(z.size() == dim, ErrorCode::input_shape, "DDU: embedding dimension mismatch");
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components) terms.push_back(std::log(c.prior) + component_log_pdf(c, z));
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

GdaModel fit_ddu(const Matrix& embeddings, std::span<const int> labels) {
  require(embeddings.rows() == labels.size(), ErrorCode::input_shape,
          "DDU: label count differs from embedding rows");
  require(embeddings.rows() > 0, ErrorCode::fit, "DDU: no embeddings");
  const std::size_t d = embeddings.cols();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  GdaModel model;
  model.dim = d;
  const double n_total = static_cast<double>(labels.size());
  for (const auto& [label, rows] : by_class) {
    require(rows.size() >= 2, ErrorCode::fit,
            "DDU: class " + std::to_string(label) + " has fewer than 2 samples");
    for (std::size_t r : rows) {
      for (double v : embeddings.row(r)) {
        require(std::isfinite(v), ErrorCode::fit, "DDU: non-finite embedding");
      }
    }
    GaussianComponent c;
    c.label = label;
    c.prior = static_cast<double>(rows.size()) / n_total;
    c.mean.assign(d, 0.0);
    for (std::size_t r : rows) {
      const auto z = embeddings.row(r);
      for (std::size_t j = 0; j < d; ++j) c.mean[j] += z[j];
    }
    for (double& v : c.mean) v /= static_cast<double>(rows.size());

    Matrix cov(d, d);
    for (std::size_t r : rows) {
      const auto z = embeddings.row(r);
      for (std::size_t i = 0; i < d; ++i) {
        const double di = z[i] - c.mean[i];
        for (std::size_t j = 0; j <= i; ++j) cov(i, j) += di * (z[j] - c.mean[j]);
      }
    }
    const double denom = static_cast<double>(rows.size() - 1);
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        cov(i, j) /= denom;
        cov(j, i) = cov(i, j);
      }
      mean_diag += cov(i, i);
    }
    mean_diag /= static_cast<double>(d);
    const double scale = mean_diag > 0.0 ? mean_diag : 1.0;

    bool ok = false;
    for (int level = 0; level <= 8 && !ok; ++level) {
      const double jitter = level == 0 ? 0.0 : std::pow(10.0, level - 9) * scale;
      Matrix trial = cov;
      for (std::size_t i = 0; i < d; ++i) trial(i, i) += jitter;
      if (cholesky_lower(trial)) {
        ok = true;
        c.cholesky = std::move(trial);
        c.jitter = jitter;
      }
    }
    require(ok, ErrorCode::numerical,
            "DDU: covariance of class " + std::to_string(label) + " is not positive definite");
    c.log_det = 0.0;
    for (std::size_t i = 0; i < d; ++i) c.log_det += 2.0 * std::log(c.cholesky(i, i));
    model.jitter_used = std::max(model.jitter_used, c.jitter);
    model.components.push_back(std::move(c));
  }
  return model;
}

double score_ddu(const GdaModel& model, std::span<const double> z) {
  return -model.log_density(z);
}

}  // namespace loco::ood
