#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision inner loops used by the network, the DUQ head and
// the neighbour index. A scalar reference implementation is always present;
// the AVX2/FMA variant is selected at runtime when the CPU supports it.
// `LOCO_SIMD=scalar` in the environment pins the reference path.

namespace loco::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = W x (+ bias when non-null); W is rows x cols row-major
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x,
               const double* bias, double* y);
  // y += W^T x
  void (*gemv_t)(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 double* y);
  // W += alpha * u v^T
  void (*rank1)(double alpha, const double* u, std::size_t rows, const double* v,
                std::size_t cols, double* w);
};

bool supported(Isa isa) noexcept;
const KernelTable& table(Isa isa);

// Process-wide selection. Chosen once from CPU features and the environment;
// tests may override it.
Isa active_isa() noexcept;
void set_active_isa(Isa isa);
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

namespace detail {
extern const KernelTable scalar_table;
// nullptr when the translation unit was built without AVX2 support.
const KernelTable* avx2_table() noexcept;
}  // namespace detail

}  // namespace loco::simd
