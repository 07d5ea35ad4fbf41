#pragma once

#include <span>
#include <string>
#include <vector>

namespace loco::stats {

struct TestResult {
  double statistic = 0.0;  // rho, W, H or U depending on the test
  double p_value = 1.0;
  std::string method;
};

// Pearson correlation of average ranks; two-sided p from Student's t with
// n - 2 degrees of freedom. Needs n >= 3 and non-constant inputs.
TestResult spearman(std::span<const double> x, std::span<const double> y);

// Paired test on a - b. Zero differences are dropped; W = min(W+, W-).
// Exact null distribution when there are no tied |d| and n <= 50, otherwise
// normal approximation with continuity and tie correction. All differences
// zero gives W = 0, p = 1.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// H with tie correction; p from the chi-square survival with k - 1 dof.
TestResult kruskal_wallis(std::span<const std::vector<double>> groups);

// U for sample `a`. Exact two-sided p when there are no ties and both sizes
// are <= 50, otherwise normal approximation with continuity and tie correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Holm step-down adjustment; output in input order, monotone, capped at 1.
std::vector<double> holm_correction(std::span<const double> p_values);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

}  // namespace loco::stats
