#include "loco/nn/functional.hpp"

#include <algorithm>
#include <cmath>

#include "loco/error.hpp"

namespace loco::nn {
namespace {

void check_finite(std::span<const double> v, const char* what) {
  require(!v.empty(), ErrorCode::validation, std::string(what) + ": empty vector");
  for (double x : v) {
    require(std::isfinite(x), ErrorCode::validation, std::string(what) + ": non-finite entry");
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  check_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double log_sum_exp(std::span<const double> v) {
  check_finite(v, "log_sum_exp");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double entropy(std::span<const double> p) {
  require(!p.empty(), ErrorCode::validation, "entropy: empty vector");
  double total = 0.0;
  double h = 0.0;
  for (double v : p) {
    require(std::isfinite(v), ErrorCode::validation, "entropy: non-finite entry");
    require(v >= 0.0, ErrorCode::validation, "entropy: negative probability");
    total += v;
    if (v > 0.0) h -= v * std::log(v);
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorCode::validation,
          "entropy: probabilities do not sum to 1");
  return std::max(h, 0.0);
}

}  // namespace loco::nn
