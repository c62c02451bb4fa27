#pragma once

#include <vector>

#include "fsfl/errors.hpp"
#include "fsfl/tensor.hpp"

namespace fsfl {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Optimizer state: one (first moment, second moment) pair per parameter
/// tensor, shapes mirroring the parameters. step_count is shared.
struct AdamState {
  int step_count = 0;
  std::vector<TensorF> m;
  std::vector<TensorF> v;

  static AdamState init_like(const std::vector<const TensorF*>& params);
};

/// Bias-corrected Adam update, in place. Throws NumericsError on non-finite
/// gradients, naming the offending tensor index.
void adam_step(const std::vector<TensorF*>& params,
               const std::vector<const TensorF*>& grads, AdamState& state, float lr,
               const AdamConfig& cfg = {});

}  // namespace fsfl
