#pragma once

#include <cstdint>
#include <vector>

#include "vtsdf/geometry.hpp"
#include "vtsdf/shapes.hpp"

namespace vtsdf {

// Multiresolution hash-grid encoding + small MLP mapping an object-frame
// point to signed distance. Forward, parameter-backward and point-gradient
// passes are hand-written; evaluation cost is independent of history.
struct FieldConfig {
  int levels = 8;
  int features_per_level = 2;
  int table_size = 1 << 19;  // entries per level; power of two
  int base_resolution = 16;  // cells per side at level 0
  double growth_factor = 1.5;
  int mlp_layers = 3;  // linear layers: levels*features -> width -> width -> 1
  int mlp_width = 64;
  double bound_side = 0.15;  // meters, cube side
  Vec3 bound_center = Vec3::Zero();
  double truncation = 0.005;  // d_tr: out-of-bound offset and bias init

  int level_resolution(int level) const;  // cells per side
  int encoding_dim() const { return levels * features_per_level; }
  void validate() const;
  bool operator==(const FieldConfig& o) const;
};

struct FieldParams {
  FieldConfig cfg;
  std::vector<double> values;  // per-level tables, then MLP weights/biases

  size_t table_offset(int level) const {
    return size_t(level) * cfg.table_size * cfg.features_per_level;
  }
  size_t mlp_offset() const {
    return size_t(cfg.levels) * cfg.table_size * cfg.features_per_level;
  }
};

// Total number of parameters (tables + MLP) for a config.
size_t field_param_count(const FieldConfig& cfg);

// Seeded init: tables U[-1e-4, 1e-4], MLP Kaiming-uniform, last bias = +d_tr
// so empty space starts positive.
FieldParams field_init(const FieldConfig& cfg, uint64_t seed);

// Dense gradient buffer that remembers which entries were written so it can
// be re-zeroed without touching all parameters.
struct GradAccumulator {
  std::vector<double> g;
  std::vector<uint32_t> touched;  // table entry offsets (per feature)
  bool mlp_touched = false;

  void ensure(const FieldParams& params);
  void clear(const FieldParams& params);  // zero touched entries + MLP block
};

// Reusable batched evaluation workspace; caches activations for backward.
class FieldBatch {
 public:
  // Returns per-point signed distance. Out-of-bound points get
  // (distance to the bound box) + d_tr and an out_of_bound flag.
  const VecX& forward(const FieldParams& params, const Pose& object_pose,
                      const std::vector<Vec3>& pts_world);

  // Accumulates d(sum_i upstream_i * F_i)/d(params) into acc. Must follow a
  // forward() with the same params/points. Out-of-bound rows contribute 0.
  void backward_params(const FieldParams& params, const VecX& upstream,
                       GradAccumulator& acc) const;

  // d F / d p_world per point (analytic). Out-of-bound rows get the gradient
  // of the clamp branch, flagged via oob().
  void gradient_point(const FieldParams& params,
                      std::vector<Vec3>& grad_world) const;

  const VecX& values() const { return value_; }
  const std::vector<uint8_t>& oob() const { return oob_; }
  int size() const { return n_; }

 private:
  friend struct FieldBatchTestAccess;

  int n_ = 0;
  Mat3 obj_rot_;  // object-to-world rotation of the cached pose
  std::vector<uint8_t> oob_;
  std::vector<Vec3> p_obj_;
  std::vector<uint32_t> corner_idx_;  // n x levels x 8 global table entries
  std::vector<double> frac_;          // n x levels x 3
  MatX enc_;                          // n x enc_dim
  MatX h_[2], sig_[2];                // hidden activations and sigmoid(beta z)
  VecX value_;
};

// --- one-shot wrappers -----------------------------------------------------

struct FieldEvalResult {
  VecX values;
  std::vector<uint8_t> out_of_bound;
};

FieldEvalResult field_eval(const FieldParams& params, const Pose& object_pose,
                           const std::vector<Vec3>& pts_world);

// Dense parameter gradient (allocates a full params-sized vector).
std::vector<double> field_backward_params(const FieldParams& params,
                                          const Pose& object_pose,
                                          const std::vector<Vec3>& pts_world,
                                          const VecX& upstream);

struct FieldPointGradResult {
  std::vector<Vec3> grad_world;
  std::vector<uint8_t> out_of_bound;
};

FieldPointGradResult field_gradient_point(const FieldParams& params,
                                          const Pose& object_pose,
                                          const std::vector<Vec3>& pts_world);

// ---------------------------------------------------------------------------
// Shared read-only field interface so trackers / extraction / tests can run
// on either the learned field or an analytic oracle.
struct DistanceField {
  virtual ~DistanceField() = default;
  virtual void eval(const Pose& object_pose, const std::vector<Vec3>& pts_world,
                    VecX& out, std::vector<uint8_t>* oob) const = 0;
  virtual void eval_with_gradient(const Pose& object_pose,
                                  const std::vector<Vec3>& pts_world, VecX& out,
                                  std::vector<Vec3>& grad_world,
                                  std::vector<uint8_t>* oob) const = 0;
};

class NeuralDistanceField : public DistanceField {
 public:
  explicit NeuralDistanceField(const FieldParams* params) : params_(params) {}
  void eval(const Pose& object_pose, const std::vector<Vec3>& pts_world,
            VecX& out, std::vector<uint8_t>* oob) const override;
  void eval_with_gradient(const Pose& object_pose,
                          const std::vector<Vec3>& pts_world, VecX& out,
                          std::vector<Vec3>& grad_world,
                          std::vector<uint8_t>* oob) const override;

 private:
  const FieldParams* params_;
  mutable FieldBatch batch_;
};

class AnalyticDistanceField : public DistanceField {
 public:
  explicit AnalyticDistanceField(GroundTruthShape shape)
      : shape_(std::move(shape)) {}
  void eval(const Pose& object_pose, const std::vector<Vec3>& pts_world,
            VecX& out, std::vector<uint8_t>* oob) const override;
  void eval_with_gradient(const Pose& object_pose,
                          const std::vector<Vec3>& pts_world, VecX& out,
                          std::vector<Vec3>& grad_world,
                          std::vector<uint8_t>* oob) const override;

 private:
  GroundTruthShape shape_;
};

}  // namespace vtsdf
