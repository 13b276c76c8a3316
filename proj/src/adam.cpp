#include "vtsdf/adam.hpp"

#include <cmath>

#include "vtsdf/errors.hpp"

namespace vtsdf {

void adam_step(std::vector<double>& values, AdamState& state,
               const std::vector<double>& grads) {
  const size_t n = values.size();
  require(grads.size() == n, "adam: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  require(state.m.size() == n && state.v.size() == n,
          "adam: state size mismatch");

  // Reject non-finite gradients before mutating anything.
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += std::abs(grads[i]);
  if (!std::isfinite(acc))
    throw NonFiniteGradient("adam: non-finite gradient");

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));
  const double decay = state.lr * state.weight_decay;

  double* p = values.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grads.data();
  for (size_t i = 0; i < n; ++i) {
    if (g[i] == 0.0 && m[i] == 0.0 && v[i] == 0.0) {
      p[i] -= decay * p[i];
      continue;
    }
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    p[i] -= state.lr * mh / (std::sqrt(vh) + state.eps) + decay * p[i];
  }
}

void adam_step(FieldParams& params, AdamState& state,
               const std::vector<double>& grads) {
  adam_step(params.values, state, grads);
}

}  // namespace vtsdf
