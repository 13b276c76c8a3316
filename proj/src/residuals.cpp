#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "vtsdf/errors.hpp"
#include "vtsdf/mesh.hpp"
#include "vtsdf/pose_tracker.hpp"

namespace vtsdf {
namespace {

// Draw up to `want` distinct mask-true pixels with valid depth, pooled across
// the entry's sensors. Random probing first (cheap for dense masks), exhaustive
// fallback so sparse masks stay deterministic.
std::vector<std::pair<int, int32_t>> draw_surface_pixels(
    const WindowFrame& entry, Rng& rng, int want) {
  std::vector<std::pair<int, int32_t>> out;
  size_t total = 0;
  for (const SensorFrame& f : entry.frames) total += f.mask.data.size();
  if (total == 0) return out;

  auto valid = [&](int f, int32_t p) {
    const SensorFrame& fr = entry.frames[size_t(f)];
    return fr.mask.data[p] && depth_valid(fr.depth.data[p]);
  };

  const int max_probes = 50 * want;
  for (int probe = 0; probe < max_probes && int(out.size()) < want; ++probe) {
    size_t lin = size_t(rng.uniform_int(int(std::min<size_t>(
                     total, size_t(std::numeric_limits<int>::max())))));
    int f = 0;
    while (lin >= entry.frames[size_t(f)].mask.data.size()) {
      lin -= entry.frames[size_t(f)].mask.data.size();
      ++f;
    }
    const auto cand = std::make_pair(f, int32_t(lin));
    if (!valid(cand.first, cand.second)) continue;
    if (std::find(out.begin(), out.end(), cand) == out.end())
      out.push_back(cand);
  }
  if (int(out.size()) >= want) return out;

  out.clear();
  std::vector<std::pair<int, int32_t>> pool;
  for (int f = 0; f < int(entry.frames.size()); ++f)
    for (int32_t p = 0; p < int32_t(entry.frames[size_t(f)].mask.data.size()); ++p)
      if (valid(f, p)) pool.emplace_back(f, p);
  const int take = std::min<int>(want, int(pool.size()));
  for (int i = 0; i < take; ++i) {
    std::swap(pool[size_t(i)],
              pool[size_t(i + rng.uniform_int(int(pool.size()) - i))]);
    out.push_back(pool[size_t(i)]);
  }
  return out;
}

Vec3 backproject_world(const SensorFrame& fr, int32_t p) {
  const int x = p % fr.model.width, y = p / fr.model.width;
  return fr.pose_world * backproject(fr.model, x, y, double(fr.depth.data[p]));
}

// Outward world normal from central differences on the depth image; nullopt
// when a neighbor is missing.
bool vision_normal(const SensorFrame& fr, int32_t p, Vec3& n_world) {
  const int x = p % fr.model.width, y = p / fr.model.width;
  if (x < 1 || y < 1 || x + 1 >= fr.model.width || y + 1 >= fr.model.height)
    return false;
  const float dxm = fr.depth.at(x - 1, y), dxp = fr.depth.at(x + 1, y);
  const float dym = fr.depth.at(x, y - 1), dyp = fr.depth.at(x, y + 1);
  if (!depth_valid(dxm) || !depth_valid(dxp) || !depth_valid(dym) ||
      !depth_valid(dyp))
    return false;
  const Vec3 du = backproject(fr.model, x + 1, y, dxp) -
                  backproject(fr.model, x - 1, y, dxm);
  const Vec3 dv = backproject(fr.model, x, y + 1, dyp) -
                  backproject(fr.model, x, y - 1, dym);
  Vec3 n_cam = du.cross(dv);
  const double len = n_cam.norm();
  if (len < 1e-12) return false;
  n_cam /= len;
  const Vec3 view = backproject(fr.model, x, y, double(fr.depth.at(x, y)));
  if (n_cam.dot(view) > 0) n_cam = -n_cam;  // face the camera
  n_world = fr.pose_world.rotation() * n_cam;
  return true;
}

}  // namespace

SdfMeasurements sample_sdf_measurements(const PoseWindow& window, Rng& rng,
                                        int rays_per_frame, int min_pixels) {
  SdfMeasurements meas;
  meas.points_world.resize(window.entries.size());
  for (size_t i = 0; i < window.entries.size(); ++i) {
    const auto px = draw_surface_pixels(window.entries[i], rng, rays_per_frame);
    if (int(px.size()) < min_pixels) continue;  // degenerate: drop the frame
    for (const auto& [f, p] : px)
      meas.points_world[i].push_back(
          backproject_world(window.entries[i].frames[size_t(f)], p));
  }
  return meas;
}

IcpMeasurements build_icp_measurements(const PoseWindow& window,
                                       const DistanceField& field,
                                       const TrackerConfig& cfg) {
  IcpMeasurements meas;
  const int n = int(window.entries.size());
  if (n < 2) return meas;

  // per-entry near-dense cloud with world normals (zero when unavailable)
  struct Cloud {
    std::vector<Vec3> p_world, n_world;
  };
  std::vector<Cloud> clouds(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const WindowFrame& entry = window.entries[size_t(i)];
    std::vector<size_t> tactile_idx;
    for (const SensorFrame& fr : entry.frames) {
      const bool vision = fr.model.kind == SensorModel::Kind::Vision;
      const int cap =
          vision ? cfg.icp_max_points_vision : cfg.icp_max_points_tactile;
      int valid = 0;
      for (size_t p = 0; p < fr.mask.data.size(); ++p)
        if (fr.mask.data[p] && depth_valid(fr.depth.data[p])) ++valid;
      const int stride = std::max(1, (valid + cap - 1) / std::max(1, cap));

      int seen = 0;
      for (int32_t p = 0; p < int32_t(fr.mask.data.size()); ++p) {
        if (!fr.mask.data[p] || !depth_valid(fr.depth.data[p])) continue;
        if (seen++ % stride != 0) continue;
        Vec3 nw = Vec3::Zero();
        if (vision) {
          // silhouette pixels lack stable normals and their depth tracks the
          // occluding contour rather than a material point; skip them
          if (!vision_normal(fr, p, nw)) continue;
        } else {
          tactile_idx.push_back(clouds[size_t(i)].p_world.size());
        }
        clouds[size_t(i)].p_world.push_back(backproject_world(fr, p));
        clouds[size_t(i)].n_world.push_back(nw);
      }
    }
    if (!tactile_idx.empty()) {  // touch normals from the field gradient
      std::vector<Vec3> pts;
      for (size_t k : tactile_idx)
        pts.push_back(clouds[size_t(i)].p_world[k]);
      VecX vals;
      std::vector<Vec3> grads;
      field.eval_with_gradient(entry.pose, pts, vals, grads, nullptr);
      for (size_t j = 0; j < tactile_idx.size(); ++j) {
        const double len = grads[j].norm();
        if (len > 1e-9)
          clouds[size_t(i)].n_world[tactile_idx[j]] = grads[j] / len;
      }
    }
  }

  for (int i = 0; i + 1 < n; ++i) {
    const WindowFrame& ea = window.entries[size_t(i)];
    const WindowFrame& eb = window.entries[size_t(i) + 1];
    if (clouds[size_t(i)].p_world.empty() ||
        clouds[size_t(i) + 1].p_world.empty())
      continue;
    const Pose inv_a = ea.pose.inverse();
    const Pose inv_b = eb.pose.inverse();
    const Mat3 rot_a_t = inv_a.rotation();

    std::vector<Vec3> qa(clouds[size_t(i)].p_world.size());
    for (size_t k = 0; k < qa.size(); ++k)
      qa[k] = inv_a * clouds[size_t(i)].p_world[k];
    PointGrid grid(qa, cfg.icp_reject_dist);

    IcpPair pair;
    pair.frame_a = i;
    pair.frame_b = i + 1;
    for (size_t k = 0; k < clouds[size_t(i) + 1].p_world.size(); ++k) {
      const Vec3& pb = clouds[size_t(i) + 1].p_world[k];
      int idx = -1;
      const double d = grid.nn_distance(inv_b * pb, &idx);
      if (d > cfg.icp_reject_dist || idx < 0) continue;
      const Vec3& na = clouds[size_t(i)].n_world[size_t(idx)];
      const Vec3& nb = clouds[size_t(i) + 1].n_world[k];
      const bool has_na = na.squaredNorm() > 0.5;
      const bool has_nb = nb.squaredNorm() > 0.5;
      if (has_na && has_nb && na.dot(nb) < cfg.icp_normal_min_dot)
        continue;  // facing different surfaces; NN match is spurious
      pair.pa_world.push_back(clouds[size_t(i)].p_world[size_t(idx)]);
      pair.pb_world.push_back(pb);
      pair.normal_obj.push_back(has_na ? Vec3(rot_a_t * na) : Vec3::Zero());
      pair.plane.push_back(has_na);
    }
    if (int(pair.pa_world.size()) >= cfg.min_icp_corresp)
      meas.pairs.push_back(std::move(pair));
  }
  return meas;
}

Residual sdf_residual(const PoseWindow& window, const DistanceField& field,
                      const SdfMeasurements& meas) {
  const int n = int(window.entries.size());
  require(int(meas.points_world.size()) == n, "sdf_residual: size mismatch");
  int rows = 0;
  for (const auto& pts : meas.points_world) rows += int(pts.size());

  Residual res;
  res.kind = Residual::Kind::Sdf;
  res.values.resize(rows);
  res.jacobian = MatX::Zero(rows, 6 * n);

  int row = 0;
  VecX vals;
  std::vector<Vec3> grads;
  for (int i = 0; i < n; ++i) {
    const auto& pts = meas.points_world[size_t(i)];
    if (pts.empty()) continue;
    const Pose& x = window.entries[size_t(i)].pose;
    field.eval_with_gradient(x, pts, vals, grads, nullptr);
    const Pose inv = x.inverse();
    const Mat3 rot_t = inv.rotation();
    for (size_t k = 0; k < pts.size(); ++k, ++row) {
      res.values[row] = vals[long(k)];
      const Vec3 p_obj = inv * pts[k];
      const Vec3 g_obj = rot_t * grads[k];
      res.jacobian.block<1, 3>(row, 6 * i) = g_obj.cross(p_obj).transpose();
      res.jacobian.block<1, 3>(row, 6 * i + 3) = -g_obj.transpose();
    }
  }
  return res;
}

Residual icp_residual(const PoseWindow& window, const IcpMeasurements& meas) {
  const int n = int(window.entries.size());
  int rows = 0;
  for (const IcpPair& pair : meas.pairs)
    for (uint8_t pl : pair.plane) rows += pl ? 1 : 3;

  Residual res;
  res.kind = Residual::Kind::Icp;
  res.values.resize(rows);
  res.jacobian = MatX::Zero(rows, 6 * n);

  int row = 0;
  for (const IcpPair& pair : meas.pairs) {
    const Pose inv_a = window.entries[size_t(pair.frame_a)].pose.inverse();
    const Pose inv_b = window.entries[size_t(pair.frame_b)].pose.inverse();
    const int ca = 6 * pair.frame_a, cb = 6 * pair.frame_b;
    for (size_t k = 0; k < pair.pa_world.size(); ++k) {
      const Vec3 qa = inv_a * pair.pa_world[k];
      const Vec3 qb = inv_b * pair.pb_world[k];
      if (pair.plane[k]) {
        const Vec3& nrm = pair.normal_obj[k];
        res.values[row] = nrm.dot(qb - qa);
        res.jacobian.block<1, 3>(row, cb) = nrm.cross(qb).transpose();
        res.jacobian.block<1, 3>(row, cb + 3) = -nrm.transpose();
        res.jacobian.block<1, 3>(row, ca) = -nrm.cross(qa).transpose();
        res.jacobian.block<1, 3>(row, ca + 3) = nrm.transpose();
        ++row;
      } else {
        res.values.segment<3>(row) = qb - qa;
        res.jacobian.block<3, 3>(row, cb) = skew(qb);
        res.jacobian.block<3, 3>(row, cb + 3) = -Mat3::Identity();
        res.jacobian.block<3, 3>(row, ca) = -skew(qa);
        res.jacobian.block<3, 3>(row, ca + 3) = Mat3::Identity();
        row += 3;
      }
    }
  }
  return res;
}

Residual reg_residual(const PoseWindow& window) {
  const int n = int(window.entries.size());
  require(n >= 2, "reg_residual: need at least two poses");
  Residual res;
  res.kind = Residual::Kind::Reg;
  res.values.resize(6 * (n - 1));
  res.jacobian = MatX::Zero(6 * (n - 1), 6 * n);
  for (int i = 0; i + 1 < n; ++i) {
    const Pose rel = window.entries[size_t(i)].pose.inverse() *
                     window.entries[size_t(i) + 1].pose;
    const Twist xi = se3_log(rel);
    Twist neg;
    neg.omega = -xi.omega;
    neg.v = -xi.v;
    res.values.segment<6>(6 * i) = xi.vec();
    res.jacobian.block<6, 6>(6 * i, 6 * (i + 1)) = se3_left_jacobian_inv(neg);
    res.jacobian.block<6, 6>(6 * i, 6 * i) = -se3_left_jacobian_inv(xi);
  }
  return res;
}

}  // namespace vtsdf
