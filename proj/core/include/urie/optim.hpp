#pragma once

#include <vector>

#include "urie/checkpoint.hpp"

namespace urie {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for the trainable entries of a
/// ParamList, in the same order.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;

  static AdamState for_params(const ParamList& params, AdamConfig config = {});
};

/// One bias-corrected Adam update of every trainable parameter from its
/// accumulated gradient (missing gradients count as zero). Throws
/// NumericError, leaving parameters and state untouched, if any gradient is
/// non-finite.
void adam_step(const ParamList& params, AdamState& st, double lr);

void zero_grads(const ParamList& params);

}  // namespace urie
