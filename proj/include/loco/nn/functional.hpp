#pragma once

#include <span>
#include <vector>

namespace loco::nn {

// Max-shifted softmax. Throws validation error on empty or non-finite input.
std::vector<double> softmax(std::span<const double> logits);

// log(sum(exp(v))) with max shift.
double log_sum_exp(std::span<const double> v);

// Shannon entropy in nats, 0 ln 0 := 0. Entries must be >= 0 and sum to 1
// within 1e-6.
double entropy(std::span<const double> p);

}  // namespace loco::nn
