#pragma once

#include <cstdint>

#include "vtsdf/neural_field.hpp"
#include "vtsdf/shapes.hpp"

namespace vtsdf {

// Offline fit of a field to an analytic shape, for experiments that track a
// known object. Trains with L1 loss on a mixed pool of near-surface and
// uniform samples until a held-out mean absolute error target is met.
struct BakeOptions {
  int batch_size = 4096;
  int max_steps = 20000;
  double target_mae = 5e-4;  // meters, held-out stop threshold
  double lr = 1e-3;
  int eval_every = 250;
  uint64_t seed = 0;
  int pool_size = 120000;
  int heldout_size = 8000;
  double surface_fraction = 0.5;
  double surface_sigma = 0.01;  // stddev of offsets around the surface
  bool verbose = false;
};

struct BakeResult {
  FieldParams params;
  double heldout_mae = 0.0;
  int steps = 0;
};

// Throws FitDiverged if the held-out error becomes non-finite or explodes.
BakeResult bake_field_from_shape(const FieldConfig& cfg,
                                 const GroundTruthShape& shape,
                                 const BakeOptions& opts = {});

}  // namespace vtsdf
