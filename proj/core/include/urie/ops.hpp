#pragma once

#include <utility>

#include "urie/autograd.hpp"

namespace urie {

inline constexpr double kLeakySlope = 0.01;

// Elementwise ops require equal shapes; there is no broadcasting.
Var ew_add(const Var& a, const Var& b);
Var ew_sub(const Var& a, const Var& b);
Var ew_mul(const Var& a, const Var& b);
Var ew_div(const Var& a, const Var& b);

Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);

/// x if x > 0 else slope * x. The derivative at exactly 0 is taken as 1.
Var leaky_relu(const Var& x, double slope = kLeakySlope);

/// Clamps to [lo, hi]; gradient passes where lo <= x <= hi.
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);
Var mean(const Var& x);

Var reshape(const Var& x, Shape shape);

/// Stabilized two-way softmax per element:
/// first = exp(a) / (exp(a) + exp(b)), second = exp(b) / (exp(a) + exp(b)),
/// evaluated after subtracting max(a, b).
std::pair<Var, Var> pairwise_softmax(const Var& a, const Var& b);

/// Mean squared difference over all elements.
Var mse(const Var& a, const Var& b);

}  // namespace urie
