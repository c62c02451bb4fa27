#include "fsfl/adam.hpp"

#include <cmath>
#include <string>

namespace fsfl {

AdamState AdamState::init_like(const std::vector<const TensorF*>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const TensorF* p : params) {
    st.m.emplace_back(p->shape);
    st.v.emplace_back(p->shape);
  }
  return st;
}

void adam_step(const std::vector<TensorF*>& params,
               const std::vector<const TensorF*>& grads, AdamState& state, float lr,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, state holds " +
                     std::to_string(state.m.size()));
  }
  for (size_t k = 0; k < params.size(); ++k) {
    require_same_shape(*params[k], *grads[k], "adam_step");
    if (!grads[k]->all_finite()) {
      throw NumericsError("adam_step: non-finite gradient in tensor " + std::to_string(k) +
                          " (shape " + grads[k]->shape_str() + ", step " +
                          std::to_string(state.step_count + 1) + ")");
    }
  }
  state.step_count += 1;
  const double t = state.step_count;
  const double corr1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
  const double corr2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
  for (size_t k = 0; k < params.size(); ++k) {
    TensorF& p = *params[k];
    const TensorF& gr = *grads[k];
    TensorF& m = state.m[k];
    TensorF& v = state.v[k];
    for (size_t i = 0; i < p.data.size(); ++i) {
      const float gi = gr.data[i];
      m.data[i] = cfg.beta1 * m.data[i] + (1.0f - cfg.beta1) * gi;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0f - cfg.beta2) * gi * gi;
      const double mhat = m.data[i] / corr1;
      const double vhat = v.data[i] / corr2;
      p.data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace fsfl
