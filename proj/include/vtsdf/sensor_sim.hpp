#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtsdf/geometry.hpp"
#include "vtsdf/image.hpp"
#include "vtsdf/shapes.hpp"

namespace vtsdf {

// Pinhole depth sensor. Pixel (x, y) casts through ((x-cx)/fx, (y-cy)/fy, 1)
// in camera frame (+z = optical axis); depth is the camera-frame z of the hit.
struct SensorModel {
  std::string id;
  enum class Kind { Vision, Tactile } kind = Kind::Vision;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  double near_m = 0, far_m = 0;

  static SensorModel vision_default(const std::string& id = "cam0");
  // 240x320 centimeter-range gel camera.
  static SensorModel tactile_default(const std::string& id);
};

// Unnormalized camera-frame ray direction through pixel (x, y).
inline Vec3 pixel_ray(const SensorModel& s, double x, double y) {
  return Vec3((x - s.cx) / s.fx, (y - s.cy) / s.fy, 1.0);
}

// Camera-frame point at depth z (z = camera-frame depth, not ray length).
inline Vec3 backproject(const SensorModel& s, double x, double y, double z) {
  return z * pixel_ray(s, x, y);
}

struct SensorFrame {
  SensorModel model;          // intrinsics, id, kind, depth range
  double stamp = 0;
  Pose pose_world;            // sensor in world
  Image<float> depth;         // object-masked depth; NaN invalid
  Image<uint8_t> mask;        // object segmentation
  Image<float> scene_depth;   // first hit of anything; background pinned at far

  const std::string& sensor() const { return model.id; }
  double near_m() const { return model.near_m; }
  double far_m() const { return model.far_m; }
};

struct NoiseConfig {
  double factor_D = 0;   // 0 disables corruption bit-exactly
  uint64_t seed = 0;
  // constants at D = 5; each scales linearly with D/5
  double quantization_step = 0.001;  // meters
  double shuffle_radius = 1.0;       // pixels
  double hf_sigma = 0.0015;          // meters
};

// Finger-proxy occluders; world-frame capsules, posed per timestep.
struct OccluderSet {
  std::vector<GroundTruthShape> capsules;
};

// Sphere-traces the union of the posed object and the occluders.
// mask is true iff the first hit belongs to the object and its depth lies in
// [near, far]. Tactile sensors ignore occluders (the gel displaces fingers).
SensorFrame render_frame(const GroundTruthShape& object, const Pose& object_pose,
                         const OccluderSet& occluders, const SensorModel& sensor,
                         const Pose& sensor_pose, double stamp = 0);

// Handa-style corruption: pixel shuffle, quantization, then Gaussian noise,
// each scaled by D/5. Seeded per (seed, sensor, stamp); D = 0 passes through.
SensorFrame corrupt_depth(const SensorFrame& frame, const NoiseConfig& cfg);

// Normalized mean mask area per viewpoint: 0 = most occluded, 1 = least.
std::vector<double> occlusion_score(
    const std::vector<std::vector<SensorFrame>>& frames_per_viewpoint);
std::vector<double> occlusion_score_from_areas(std::vector<double> mean_areas);

// Fibonacci lattice of n inward-facing poses on a sphere.
std::vector<Pose> camera_sphere(int n, double radius, const Vec3& center);

// Camera pose at eye looking at target, up = world +z (+x when degenerate).
Pose make_lookat_pose(const Vec3& eye, const Vec3& target);

struct TrajectoryParams {
  enum class Kind { AxisRotation, WobbleRotation } kind = Kind::AxisRotation;
  Vec3 axis = Vec3::UnitZ();
  double rate_deg_s = 30;
  Vec3 center = Vec3::Zero();      // object position
  // wobble terms (limits: |tilt| <= 10 deg, |translation| <= 5 mm)
  double tilt_deg = 0, tilt_hz = 0.2;
  double trans_amp_m = 0, trans_hz = 0.25;
  // tactile anchor points; rays are cast from each toward the object center
  std::vector<Vec3> anchors;
  double standoff_m = 5e-4;  // sensor origin offset outside the surface
};

struct TrajectoryStep {
  double stamp = 0;
  Pose object_pose;
  // (sensor id, pose) for anchors whose ray hit the object this step
  std::vector<std::pair<std::string, Pose>> tactile_poses;
};

std::vector<TrajectoryStep> scripted_trajectory(const GroundTruthShape& object,
                                                const TrajectoryParams& params,
                                                double duration_s,
                                                double rate_hz);

}  // namespace vtsdf
