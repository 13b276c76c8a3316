#include "vtsdf/sensor_sim.hpp"

#include <bit>
#include <cmath>

#include "vtsdf/errors.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {

SensorModel SensorModel::vision_default(const std::string& id) {
  SensorModel s;
  s.id = id;
  s.kind = Kind::Vision;
  s.width = 160;
  s.height = 120;
  s.fx = s.fy = 180;
  s.cx = s.width / 2.0;
  s.cy = s.height / 2.0;
  s.near_m = 0.05;
  s.far_m = 1.0;
  return s;
}

SensorModel SensorModel::tactile_default(const std::string& id) {
  SensorModel s;
  s.id = id;
  s.kind = Kind::Tactile;
  s.width = 240;
  s.height = 320;
  s.fx = s.fy = 120;
  s.cx = s.width / 2.0;
  s.cy = s.height / 2.0;
  s.near_m = 0.0;
  s.far_m = 0.02;
  return s;
}

// ---------------------------------------------------------------------------
// rendering

namespace {

enum class TraceStatus { Hit, Miss, Exhausted };

struct TraceResult {
  TraceStatus status;
  double t;
};

template <typename Sdf>
TraceResult trace(const Sdf& sdf, const Vec3& o, const Vec3& d, double t_max) {
  double t = 0;
  for (int step = 0; step < 256; ++step) {
    double s = sdf(o + t * d);
    if (s < 1e-6) return {TraceStatus::Hit, t};
    t += s;
    if (t > t_max) return {TraceStatus::Miss, t};
  }
  return {TraceStatus::Exhausted, t};
}

}  // namespace

SensorFrame render_frame(const GroundTruthShape& object, const Pose& object_pose,
                         const OccluderSet& occluders, const SensorModel& sensor,
                         const Pose& sensor_pose, double stamp) {
  require(sensor.fx > 0 && sensor.fy > 0 && sensor.width > 0 && sensor.height > 0,
          "render_frame: invalid intrinsics");
  for (const auto& c : occluders.capsules)
    require(c.kind == GroundTruthShape::Kind::Capsule,
            "render_frame: occluders must be capsules");

  SensorFrame frame;
  frame.model = sensor;
  frame.stamp = stamp;
  frame.pose_world = sensor_pose;
  frame.depth = Image<float>(sensor.width, sensor.height, kInvalidDepth);
  frame.mask = Image<uint8_t>(sensor.width, sensor.height, 0);
  frame.scene_depth = Image<float>(sensor.width, sensor.height, kInvalidDepth);

  const bool use_occluders =
      sensor.kind == SensorModel::Kind::Vision && !occluders.capsules.empty();
  const Pose inv_obj = object_pose.inverse();
  const Mat3 R_inv = inv_obj.rotation();
  const Vec3 t_inv = inv_obj.t;

  auto object_sdf = [&](const Vec3& p) {
    return gt_sdf(object, R_inv * p + t_inv);
  };
  auto occluder_sdf = [&](const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : occluders.capsules) best = std::min(best, gt_sdf(c, p));
    return best;
  };
  auto scene_sdf = [&](const Vec3& p) {
    double s = object_sdf(p);
    return use_occluders ? std::min(s, occluder_sdf(p)) : s;
  };

  const Mat3 R_cam = sensor_pose.rotation();
  const Vec3 origin = sensor_pose.t;

  for (int y = 0; y < sensor.height; ++y) {
    for (int x = 0; x < sensor.width; ++x) {
      Vec3 dir_cam((x - sensor.cx) / sensor.fx, (y - sensor.cy) / sensor.fy, 1);
      double len = dir_cam.norm();
      dir_cam /= len;
      const double dz = dir_cam.z();
      Vec3 dir = R_cam * dir_cam;
      double t_max = sensor.far_m / dz + 0.002;

      TraceResult res = trace(scene_sdf, origin, dir, t_max);
      if (res.status == TraceStatus::Miss) {
        // free along the whole visible range: pin background at far
        frame.scene_depth.at(x, y) = float(sensor.far_m);
        continue;
      }
      double z = res.t * dz;
      if (res.status == TraceStatus::Exhausted) {
        // marching stalled (grazing ray): free only up to the stall point
        if (z >= sensor.near_m)
          frame.scene_depth.at(x, y) = float(std::min(z, sensor.far_m));
        continue;
      }
      if (z > sensor.far_m) {
        frame.scene_depth.at(x, y) = float(sensor.far_m);
        continue;
      }
      if (z < sensor.near_m) continue;  // blocked closer than near: unknown

      frame.scene_depth.at(x, y) = float(z);
      Vec3 hit = origin + res.t * dir;
      bool is_object =
          !use_occluders || std::abs(object_sdf(hit)) <= std::abs(occluder_sdf(hit));
      if (is_object) {
        frame.mask.at(x, y) = 1;
        frame.depth.at(x, y) = float(z);
      }
    }
  }
  return frame;
}

// ---------------------------------------------------------------------------
// corruption

SensorFrame corrupt_depth(const SensorFrame& frame, const NoiseConfig& cfg) {
  require(cfg.factor_D >= 0, "corrupt_depth: factor_D must be >= 0");
  if (cfg.factor_D == 0) return frame;

  const double scale = cfg.factor_D / 5.0;
  const int radius = int(std::lround(cfg.shuffle_radius * scale));
  const double qstep = cfg.quantization_step * scale;
  const double sigma = cfg.hf_sigma * scale;

  Rng rng(seed_mix(cfg.seed, seed_mix(hash_str(frame.sensor()),
                                      std::bit_cast<uint64_t>(frame.stamp))));

  SensorFrame out = frame;
  const int w = frame.scene_depth.width, h = frame.scene_depth.height;

  // 1) pixel shuffle of the depth map (invalid pixels keep their value)
  if (radius > 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int dx = rng.uniform_int(2 * radius + 1) - radius;
        int dy = rng.uniform_int(2 * radius + 1) - radius;
        if (!frame.scene_depth.in_bounds(x + dx, y + dy)) continue;
        float src = frame.scene_depth.at(x + dx, y + dy);
        if (depth_valid(src)) out.scene_depth.at(x, y) = src;
      }
    }
  }

  auto for_valid = [&](auto&& fn) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float& v = out.scene_depth.at(x, y);
        if (depth_valid(v)) v = fn(v);
      }
  };

  // 2) quantization
  if (qstep > 0)
    for_valid([&](float v) { return float(std::round(v / qstep) * qstep); });

  // 3) high-frequency Gaussian noise; one draw per pixel keeps the stream
  // aligned regardless of the validity pattern
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double n = rng.normal();
      float& v = out.scene_depth.at(x, y);
      if (depth_valid(v)) v = float(v + sigma * n);
    }

  for_valid([&](float v) {
    return float(std::clamp(double(v), frame.near_m(), frame.far_m()));
  });

  // object channel: masked view of the corrupted depth map; mask unchanged
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!frame.mask.at(x, y)) continue;  // invalid stays invalid
      float v = out.scene_depth.at(x, y);
      out.depth.at(x, y) = depth_valid(v) ? v : frame.depth.at(x, y);
    }
  return out;
}

// ---------------------------------------------------------------------------
// occlusion score

std::vector<double> occlusion_score_from_areas(std::vector<double> areas) {
  if (areas.empty()) throw EmptySet("occlusion_score: no viewpoints");
  double lo = *std::min_element(areas.begin(), areas.end());
  double hi = *std::max_element(areas.begin(), areas.end());
  if (hi - lo <= 0) return std::vector<double>(areas.size(), 1.0);
  for (double& a : areas) a = (a - lo) / (hi - lo);
  return areas;
}

std::vector<double> occlusion_score(
    const std::vector<std::vector<SensorFrame>>& frames_per_viewpoint) {
  if (frames_per_viewpoint.empty())
    throw EmptySet("occlusion_score: no viewpoints");
  std::vector<double> areas;
  areas.reserve(frames_per_viewpoint.size());
  for (const auto& frames : frames_per_viewpoint) {
    if (frames.empty()) throw EmptySet("occlusion_score: empty viewpoint");
    double sum = 0;
    for (const auto& f : frames)
      for (uint8_t m : f.mask.data) sum += m ? 1 : 0;
    areas.push_back(sum / double(frames.size()));
  }
  return occlusion_score_from_areas(std::move(areas));
}

// ---------------------------------------------------------------------------
// camera placement and trajectories

Pose make_lookat_pose(const Vec3& eye, const Vec3& target) {
  Vec3 fwd = target - eye;
  require(fwd.norm() > 1e-12, "make_lookat_pose: eye equals target");
  fwd.normalize();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(fwd.dot(up)) > 1.0 - 1e-9) up = Vec3::UnitX();
  // +z forward, +y down in the image; -y_cam aligns with the up vector
  Vec3 xc = fwd.cross(up).normalized();
  Vec3 yc = fwd.cross(xc);
  Mat3 R;
  R.col(0) = xc;
  R.col(1) = yc;
  R.col(2) = fwd;
  Pose p;
  p.q = Quat(R);
  p.q.normalize();
  p.t = eye;
  return p;
}

std::vector<Pose> camera_sphere(int n, double radius, const Vec3& center) {
  require(n >= 1, "camera_sphere: n must be >= 1");
  require(radius > 0, "camera_sphere: radius must be positive");
  std::vector<Pose> poses;
  poses.reserve(n);
  if (n == 1) {
    poses.push_back(make_lookat_pose(center + Vec3(0, 0, radius), center));
    return poses;
  }
  const double golden = M_PI * (3.0 - std::sqrt(5.0));  // ~2.39996
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double r_xy = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    Vec3 pos = center + radius * Vec3(r_xy * std::cos(phi),
                                      r_xy * std::sin(phi), z);
    poses.push_back(make_lookat_pose(pos, center));
  }
  return poses;
}

std::vector<TrajectoryStep> scripted_trajectory(const GroundTruthShape& object,
                                                const TrajectoryParams& params,
                                                double duration_s,
                                                double rate_hz) {
  require(duration_s > 0 && rate_hz > 0,
          "scripted_trajectory: duration and rate must be positive");
  require(params.axis.norm() > 1e-9, "scripted_trajectory: zero axis");
  require(params.tilt_deg <= 10.0 + 1e-9,
          "scripted_trajectory: tilt limited to 10 deg");
  require(params.trans_amp_m <= 0.005 + 1e-12,
          "scripted_trajectory: translation limited to 5 mm");
  if (params.kind == TrajectoryParams::Kind::AxisRotation)
    require(params.tilt_deg == 0 && params.trans_amp_m == 0,
            "scripted_trajectory: axis-rotation takes no wobble terms");

  const Vec3 axis = params.axis.normalized();
  Vec3 tilt_axis = axis.cross(Vec3::UnitX());
  if (tilt_axis.norm() < 1e-6) tilt_axis = axis.cross(Vec3::UnitY());
  tilt_axis.normalize();
  const Vec3 trans_dir = Vec3(1.0, 0.7, 0.4).normalized();

  const int n = int(std::lround(duration_s * rate_hz));
  std::vector<TrajectoryStep> steps;
  steps.reserve(n);
  for (int i = 0; i < n; ++i) {
    TrajectoryStep step;
    step.stamp = i / rate_hz;
    double t = step.stamp;

    double theta = params.rate_deg_s * M_PI / 180.0 * t;
    Quat q(Eigen::AngleAxisd(theta, axis));
    Vec3 pos = params.center;
    if (params.kind == TrajectoryParams::Kind::WobbleRotation) {
      double tilt = params.tilt_deg * M_PI / 180.0 *
                    std::sin(2 * M_PI * params.tilt_hz * t);
      q = Quat(Eigen::AngleAxisd(tilt, tilt_axis)) * q;
      pos += params.trans_amp_m * std::sin(2 * M_PI * params.trans_hz * t) *
             trans_dir;
    }
    q.normalize();
    step.object_pose = Pose{q, pos};

    const Pose inv = step.object_pose.inverse();
    for (size_t k = 0; k < params.anchors.size(); ++k) {
      const Vec3& anchor = params.anchors[k];
      Vec3 to_center = pos - anchor;
      if (to_center.norm() < 1e-9) continue;
      Vec3 dir = to_center.normalized();
      Vec3 o_obj = inv * anchor;
      Vec3 d_obj = inv.q * dir;
      auto hit_t = raycast(object, o_obj, d_obj, to_center.norm() + 0.05);
      if (!hit_t) continue;  // anchor missed: no tactile frame this step
      Vec3 hit_obj = o_obj + *hit_t * d_obj;
      Vec3 n_world = step.object_pose.q * gt_normal(object, hit_obj);
      Vec3 origin = step.object_pose * hit_obj + params.standoff_m * n_world;
      step.tactile_poses.emplace_back("tac" + std::to_string(k),
                                      make_lookat_pose(origin, origin - n_world));
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace vtsdf
