#pragma once

#include <cstdint>
#include <vector>

#include "vtsdf/neural_field.hpp"
#include "vtsdf/rng.hpp"
#include "vtsdf/sensor_sim.hpp"
#include "vtsdf/shape_mapper.hpp"

namespace vtsdf {

// Sliding window of object-pose estimates with their measurements. Poses use
// the right-perturbation convention x <- x * exp(delta), delta = (omega, v).
struct WindowFrame {
  double stamp = 0.0;
  std::vector<SensorFrame> frames;
  Pose pose;  // object pose estimate at this stamp
};

struct PoseWindow {
  std::vector<WindowFrame> entries;  // oldest first
  int max_size = 3;
};

struct Residual {
  enum class Kind { Sdf, Icp, Reg } kind = Kind::Sdf;
  VecX values;    // meters
  MatX jacobian;  // values x (6 * window size), blocks of (omega, v)
  double weight = 1.0;
};

// --- frozen measurement sets (fixed for the duration of one solve) ---------

struct SdfMeasurements {
  // measured surface points in world, per window entry; an entry with fewer
  // than the degenerate-frame minimum is left empty (dropped from the factor)
  std::vector<std::vector<Vec3>> points_world;
};

struct IcpPair {
  int frame_a = 0, frame_b = 0;       // window indices (a older)
  std::vector<Vec3> pa_world, pb_world;
  std::vector<Vec3> normal_obj;       // frozen object-frame normals (from a)
  std::vector<uint8_t> plane;         // 1: point-to-plane row, 0: 3 point rows
};

struct IcpMeasurements {
  std::vector<IcpPair> pairs;
};

struct TrackerConfig {
  int window = 3;
  int sdf_rays_per_frame = 64;  // M
  int lm_iters = 20;
  double lm_step = 1.0;
  double lm_damping_init = 1e-4;
  double lm_damping_max = 1e6;
  int solves_per_step = 2;      // pose iterations per incoming frame
  double icp_reject_dist = 0.01;
  double icp_normal_min_dot = 0.70710678;  // reject cross-face matches
  // near-dense clouds: every valid pixel, strided down to these caps
  int icp_max_points_vision = 2048;
  int icp_max_points_tactile = 512;
  int min_sdf_pixels = 8;       // DegenerateFrame below this
  int min_icp_corresp = 16;     // InsufficientOverlap below this
  double lost_mean_residual = 0.02;
  bool use_huber = false;
  double huber_delta = 0.005;
  LossWeights weights;
  uint64_t seed = 0;
};

// Draw up to rays_per_frame mask-true pixels per window entry (pooled across
// its sensors) and back-project them to world points.
SdfMeasurements sample_sdf_measurements(const PoseWindow& window, Rng& rng,
                                        int rays_per_frame, int min_pixels);

// Nearest-neighbor pairs between consecutive frames' visuo-tactile clouds in
// the object frame at the current poses; normals from vision depth-map cross
// products or the field gradient for touch. Clouds take every valid pixel
// (strided down to the config caps), so the build is deterministic in the
// frame content. Pairs failing min_corresp are omitted.
IcpMeasurements build_icp_measurements(const PoseWindow& window,
                                       const DistanceField& field,
                                       const TrackerConfig& cfg);

// r = F(x_i^{-1} p_world) per sampled point; rows [(g_obj x p_obj)^T, -g_obj^T].
Residual sdf_residual(const PoseWindow& window, const DistanceField& field,
                      const SdfMeasurements& meas);

// point-to-plane rows n^T (x_b^{-1} p_b - x_a^{-1} p_a), point-to-point fallback.
Residual icp_residual(const PoseWindow& window, const IcpMeasurements& meas);

// r = log(x_i^{-1} x_{i+1}) per consecutive pair, penalizing relative motion.
Residual reg_residual(const PoseWindow& window);

struct LmReport {
  int iterations = 0;       // linear solves performed
  int accepted = 0;
  double cost_initial = 0.0;
  double cost_final = 0.0;
  bool singular = false;    // normal matrix not PD at max damping
  double mean_sdf_residual = 0.0;  // mean |r| at the final poses, meters
  int sdf_rows = 0, icp_rows = 0, reg_rows = 0;
};

// Damped normal-equation Levenberg-Marquardt over all window poses with
// frozen measurements. Weights enter as sqrt(w) row scaling; damping is
// Marquardt (lambda * diag, scale-invariant floor).
LmReport lm_solve(PoseWindow& window, const DistanceField& field,
                  const SdfMeasurements& sdf_meas,
                  const IcpMeasurements& icp_meas, const TrackerConfig& cfg);

struct TrackStepDiag {
  double stamp = 0.0;
  Pose pose;
  bool lost = false;
  bool singular = false;
  double mean_sdf_residual = 0.0;
  int lm_iterations = 0;
  double cost_initial = 0.0, cost_final = 0.0;
  int sdf_rows = 0, icp_rows = 0, reg_rows = 0;  // factor counts
};

// Owns the window and the motion model. Identical in SLAM and known-shape
// modes; the caller decides whether the field keeps training.
class PoseTracker {
 public:
  PoseTracker(const TrackerConfig& cfg, const Pose& initial_pose);

  // Slide the window, initialize the new pose from the constant-velocity
  // model, run solves_per_step LM solves. TrackingLost resets the newest
  // pose to the motion-model prediction.
  TrackStepDiag step(double stamp, const std::vector<SensorFrame>& frames,
                     const DistanceField& field);

  Pose predict_next() const;  // constant-velocity extrapolation
  const Pose& current_pose() const;
  const PoseWindow& window() const { return window_; }
  PoseWindow& window() { return window_; }

 private:
  TrackerConfig cfg_;
  PoseWindow window_;
  Pose initial_pose_;
  int64_t step_count_ = 0;
};

}  // namespace vtsdf
