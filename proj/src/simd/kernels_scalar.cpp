#include "loco/simd/kernels.hpp"

namespace loco::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = dot_scalar(w + r * cols, x, cols);
    y[r] = bias ? v + bias[r] : v;
  }
}

void gemv_t_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                   double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy_scalar(x[r], w + r * cols, y, cols);
  }
}

void rank1_scalar(double alpha, const double* u, std::size_t rows, const double* v,
                  std::size_t cols, double* w) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double a = alpha * u[r];
    if (a != 0.0) axpy_scalar(a, v, w + r * cols, cols);
  }
}

}  // namespace

const KernelTable scalar_table{
    dot_scalar, squared_distance_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar, rank1_scalar,
};

}  // namespace loco::simd::detail
