#pragma once

#include <cstdint>
#include <vector>

#include "vtsdf/neural_field.hpp"

namespace vtsdf {

// Decoupled-weight-decay Adam. Moments are lazily sized on first use; an
// entry with zero gradient and zero moments takes a cheap decay-only path
// that is numerically identical to the full update.
struct AdamState {
  double lr = 2e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step_count = 0;
  std::vector<double> m, v;
};

// Throws NonFiniteGradient (leaving params and state untouched) if grads
// contain a NaN or infinity.
void adam_step(FieldParams& params, AdamState& state,
               const std::vector<double>& grads);

void adam_step(std::vector<double>& values, AdamState& state,
               const std::vector<double>& grads);

}  // namespace vtsdf
