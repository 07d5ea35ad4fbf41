#include "loco/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "loco/error.hpp"
#include "loco/stats/rank.hpp"

namespace loco::stats {
namespace {

constexpr std::size_t kExactLimit = 50;

double normal_two_sided(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

// Continuity-corrected two-sided normal p for a statistic with mean mu and
// variance var.
double corrected_normal_p(double stat, double mu, double var) {
  if (!(var > 0.0)) return 1.0;
  const double dev = std::max(0.0, std::abs(stat - mu) - 0.5);
  return normal_two_sided(dev / std::sqrt(var));
}

bool has_ties(std::span<const double> v) { return tie_term(v) > 0.0; }

// P(W+ <= w) for n untied ranks, by counting sign assignments per rank sum.
double signed_rank_cdf(std::size_t n, double w) {
  const std::size_t total = n * (n + 1) / 2;
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t s = total; s >= r; --s) counts[s] += counts[s - r];
  }
  double below = 0.0;
  for (std::size_t s = 0; s <= total && static_cast<double>(s) <= w + 1e-9; ++s) below += counts[s];
  return below / std::ldexp(1.0, static_cast<int>(n));
}

// P(U <= u) under H0 for sample sizes n1, n2 without ties: distribution of the
// rank sum of an n1-subset of {1..N}.
double rank_sum_cdf(std::size_t n1, std::size_t n2, double u) {
  const std::size_t n = n1 + n2;
  const std::size_t max_sum = n * (n + 1) / 2;
  // dp[k][s]: number of k-subsets of the ranks seen so far with sum s
  std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  dp[0][0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t k = std::min(r, n1); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= r; --s) dp[k][s] += dp[k - 1][s - r];
    }
  }
  const double offset = static_cast<double>(n1 * (n1 + 1) / 2);
  double below = 0.0, all = 0.0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    all += dp[n1][s];
    if (static_cast<double>(s) - offset <= u + 1e-9) below += dp[n1][s];
  }
  return below / all;
}

}  // namespace

double chi_square_sf(double x, double dof) {
  require(dof > 0.0, ErrorCode::metric, "chi-square needs positive degrees of freedom");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::metric, "spearman: length mismatch");
  require(x.size() >= 3, ErrorCode::metric, "spearman: needs at least 3 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::metric, "spearman: rho undefined for constant input");
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  TestResult r{rho, 0.0, "spearman"};
  const double denom = 1.0 - rho * rho;
  if (denom <= 0.0) return r;
  const double t = rho * std::sqrt((n - 2.0) / denom);
  boost::math::students_t dist(n - 2.0);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  return r;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::metric, "wilcoxon: length mismatch");
  std::vector<double> diff, mag;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) {
      diff.push_back(d);
      mag.push_back(std::abs(d));
    }
  }
  TestResult r{0.0, 1.0, "wilcoxon"};
  const std::size_t n = diff.size();
  if (n == 0) return r;

  const auto ranks = average_ranks(mag);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (diff[i] > 0.0 ? w_plus : w_minus) += ranks[i];
  const double w = std::min(w_plus, w_minus);
  r.statistic = w;

  const double nn = static_cast<double>(n);
  if (!has_ties(mag) && n <= kExactLimit) {
    r.p_value = std::min(1.0, 2.0 * signed_rank_cdf(n, w));
    r.method = "wilcoxon-exact";
  } else {
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(mag) / 48.0;
    r.p_value = corrected_normal_p(w, mu, var);
    r.method = "wilcoxon-normal";
  }
  return r;
}

TestResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  require(groups.size() >= 2, ErrorCode::metric, "kruskal-wallis: needs at least 2 groups");
  std::vector<double> pooled;
  for (const auto& g : groups) {
    require(!g.empty(), ErrorCode::metric, "kruskal-wallis: empty group");
    pooled.insert(pooled.end(), g.begin(), g.end());
  }
  const auto ranks = average_ranks(pooled);
  const double n = static_cast<double>(pooled.size());
  double sum = 0.0;
  std::size_t offset = 0;
  for (const auto& g : groups) {
    double rs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) rs += ranks[offset + i];
    offset += g.size();
    sum += rs * rs / static_cast<double>(g.size());
  }
  TestResult r{0.0, 1.0, "kruskal-wallis"};
  const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
  if (correction <= 0.0) return r;
  const double h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
  r.statistic = std::max(0.0, h);
  r.p_value = chi_square_sf(r.statistic, static_cast<double>(groups.size() - 1));
  return r;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::metric, "mann-whitney: empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = average_ranks(pooled);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  double ra = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ra += ranks[i];
  const double u = ra - n1 * (n1 + 1.0) / 2.0;

  TestResult r{u, 1.0, "mann-whitney"};
  const double u_min = std::min(u, n1 * n2 - u);
  if (!has_ties(pooled) && a.size() <= kExactLimit && b.size() <= kExactLimit) {
    r.p_value = std::min(1.0, 2.0 * rank_sum_cdf(a.size(), b.size(), u_min));
    r.method = "mann-whitney-exact";
  } else {
    const double n = n1 + n2;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term(pooled) / (n * (n - 1.0)));
    r.p_value = corrected_normal_p(u, n1 * n2 / 2.0, var);
    r.method = "mann-whitney-normal";
  }
  return r;
}

std::vector<double> holm_correction(std::span<const double> p_values) {
  for (double p : p_values) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::metric, "holm: p-value outside [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const double scaled = static_cast<double>(m - rank) * p_values[order[rank]];
    running = std::max(running, std::min(1.0, scaled));
    adjusted[order[rank]] = running;
  }
  return adjusted;
}

}  // namespace loco::stats
