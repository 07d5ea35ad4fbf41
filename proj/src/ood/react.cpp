#include "loco/ood/react.hpp"

#include <algorithm>
#include <limits>

#include "loco/error.hpp"
#include "loco/stats/rank.hpp"

namespace loco::ood {

ReactState ReactState::fit(const Matrix& train_embeddings, double percentile) {
  require(percentile > 0.0 && percentile <= 100.0, ErrorCode::configuration,
          "ReAct percentile must lie in (0, 100]");
  require(!train_embeddings.empty(), ErrorCode::configuration, "ReAct fit set is empty");
  std::vector<double> pooled(train_embeddings.flat().begin(), train_embeddings.flat().end());
  std::sort(pooled.begin(), pooled.end());
  ReactState s;
  s.clamp = stats::quantile_sorted(pooled, percentile / 100.0);
  s.percentile = percentile;
  s.fitted_on = pooled.size();
  return s;
}

ReactState ReactState::identity() {
  ReactState s;
  s.clamp = std::numeric_limits<double>::infinity();
  s.percentile = 100.0;
  return s;
}

void ReactState::apply(std::span<double> embedding) const noexcept {
  for (double& v : embedding) v = std::min(v, clamp);
}

std::vector<double> ReactState::applied(std::span<const double> embedding) const {
  std::vector<double> out(embedding.begin(), embedding.end());
  apply(out);
  return out;
}

}  // namespace loco::ood
