#pragma once

#include <span>
#include <vector>

#include "loco/tensor.hpp"

namespace loco::ood {

// One Gaussian per class with its own covariance (Gaussian discriminant
// analysis) fitted on penultimate embeddings.
struct GaussianComponent {
  int label = 0;
  std::vector<double> mean;
  Matrix cholesky;  // lower triangular factor of the (jittered) covariance
  double log_det = 0.0;
  double prior = 0.0;
  double jitter = 0.0;
};

struct GdaModel {
  std::size_t dim = 0;
  std::vector<GaussianComponent> components;
  double jitter_used = 0.0;  // largest jitter any class needed

  // log sum_c pi_c N(z; mu_c, Sigma_c)
  double log_density(std::span<const double> z) const;
};

// In-place lower Cholesky factorization. Fails (returns false) when a pivot is
// not above `rel_tol` times the largest diagonal entry.
bool cholesky_lower(Matrix& a, double rel_tol = 1e-12);

// Per-class sample covariance (n - 1 denominator) plus the smallest jitter from
// {0, 1e-8, 1e-7, ..., 1e-1} x (mean diagonal) that factorizes.
GdaModel fit_ddu(const Matrix& embeddings, std::span<const int> labels);

// -log density; higher means more OOD.
double score_ddu(const GdaModel& model, std::span<const double> z);

}  // namespace loco::ood
