#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "loco/simd/kernels.hpp"

using namespace loco::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Reordered summation differs by rounding only; bound it by the magnitude of
// the terms.
void check_close(double a, double b, double magnitude) {
  CHECK(std::abs(a - b) <= 1e-13 * (magnitude + 1.0));
}

}  // namespace

TEST_CASE("scalar reference matches plain loops") {
  const auto& s = table(Isa::scalar);
  std::vector<double> a{1, 2, 3}, b{4, -5, 6};
  CHECK(s.dot(a.data(), b.data(), 3) == 12.0);
  CHECK(s.squared_distance(a.data(), b.data(), 3) == 9.0 + 49.0 + 9.0);
  s.axpy(2.0, a.data(), b.data(), 3);
  CHECK(b == std::vector<double>{6, -1, 12});
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!supported(Isa::avx2)) {
    MESSAGE("AVX2 not available on this host; equivalence test skipped");
    return;
  }
  const auto& ref = table(Isa::scalar);
  const auto& vec = table(Isa::avx2);
  std::mt19937_64 rng(7);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]) + (a[i] - b[i]) * (a[i] - b[i]);

    check_close(ref.dot(a.data(), b.data(), n), vec.dot(a.data(), b.data(), n), mag);
    check_close(ref.squared_distance(a.data(), b.data(), n),
                vec.squared_distance(a.data(), b.data(), n), mag);

    auto y1 = b, y2 = b;
    ref.axpy(-0.75, a.data(), y1.data(), n);
    vec.axpy(-0.75, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) check_close(y1[i], y2[i], std::abs(a[i]) + std::abs(b[i]));
  }

  for (std::size_t rows : {1u, 3u, 8u, 13u}) {
    for (std::size_t cols : {1u, 4u, 7u, 33u}) {
      const auto w = random_vec(rng, rows * cols);
      const auto x = random_vec(rng, cols);
      const auto xr = random_vec(rng, rows);
      const auto bias = random_vec(rng, rows);
      std::vector<double> y1(rows), y2(rows);
      ref.gemv(w.data(), rows, cols, x.data(), bias.data(), y1.data());
      vec.gemv(w.data(), rows, cols, x.data(), bias.data(), y2.data());
      for (std::size_t r = 0; r < rows; ++r) check_close(y1[r], y2[r], 100.0 * cols);

      std::vector<double> t1(cols, 1.0), t2(cols, 1.0);
      ref.gemv_t(w.data(), rows, cols, xr.data(), t1.data());
      vec.gemv_t(w.data(), rows, cols, xr.data(), t2.data());
      for (std::size_t c = 0; c < cols; ++c) check_close(t1[c], t2[c], 100.0 * rows);

      auto w1 = w, w2 = w;
      ref.rank1(0.3, xr.data(), rows, x.data(), cols, w1.data());
      vec.rank1(0.3, xr.data(), rows, x.data(), cols, w2.data());
      for (std::size_t i = 0; i < w.size(); ++i) check_close(w1[i], w2[i], 100.0);
    }
  }
}

TEST_CASE("active table follows the selected isa") {
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(&active() == &table(Isa::scalar));
  if (supported(Isa::avx2)) {
    set_active_isa(Isa::avx2);
    CHECK(active_isa() == Isa::avx2);
  }
  set_active_isa(before);
}
