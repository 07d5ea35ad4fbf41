#include "loco/ood/dknn.hpp"

#include <algorithm>
#include <cmath>

#include "loco/error.hpp"
#include "loco/simd/kernels.hpp"

namespace loco::ood {

std::vector<double> unit_normalized(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  const double norm = std::sqrt(simd::dot(v, v));
  if (norm > 0.0) {
    for (double& x : out) x /= norm;
  }
  return out;
}

DknnIndex DknnIndex::fit(const Matrix& embeddings, std::size_t k) {
  require(k >= 1 && k <= embeddings.rows(), ErrorCode::configuration,
          "d-KNN: k must lie in [1, number of stored vectors]");
  DknnIndex index;
  index.k_ = k;
  index.stored_ = Matrix(embeddings.rows(), embeddings.cols());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto u = unit_normalized(embeddings.row(i));
    std::copy(u.begin(), u.end(), index.stored_.row(i).begin());
  }
  return index;
}

double DknnIndex::score(std::span<const double> z) const { return score(z, k_); }

double DknnIndex::score(std::span<const double> z, std::size_t k) const {
  require(k >= 1 && k <= stored_.rows(), ErrorCode::configuration, "d-KNN: k out of range");
  require(z.size() == stored_.cols(), ErrorCode::input_shape, "d-KNN: dimension mismatch");
  const auto q = unit_normalized(z);
  std::vector<double> sq(stored_.rows());
  for (std::size_t i = 0; i < stored_.rows(); ++i) sq[i] = simd::squared_distance(q, stored_.row(i));
  std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(k - 1), sq.end());
  return std::sqrt(sq[k - 1]);
}

std::vector<double> DknnIndex::sorted_distances(std::span<const double> z) const {
  require(z.size() == stored_.cols(), ErrorCode::input_shape, "d-KNN: dimension mismatch");
  const auto q = unit_normalized(z);
  std::vector<double> d(stored_.rows());
  for (std::size_t i = 0; i < stored_.rows(); ++i) d[i] = simd::squared_distance(q, stored_.row(i));
  std::sort(d.begin(), d.end());
  for (double& v : d) v = std::sqrt(v);
  return d;
}

}  // namespace loco::ood
