#pragma once

#include <span>
#include <vector>

namespace loco::stats {

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Sum over tie groups of (t^3 - t); zero when all values are distinct.
double tie_term(std::span<const double> values);

// Linear-interpolation quantile, q in [0, 1]: with sorted a_1..a_n and
// h = (n - 1) q, returns a_{floor(h)+1} + (h - floor h)(a_{floor(h)+2} - a_{floor(h)+1}).
double quantile(std::span<const double> values, double q);
double quantile_sorted(std::span<const double> sorted, double q);

double median(std::span<const double> values);
// Q3 - Q1 with linear-interpolation quartiles.
double iqr(std::span<const double> values);

}  // namespace loco::stats
