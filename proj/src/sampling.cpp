#include <algorithm>
#include <cmath>

#include "vtsdf/errors.hpp"
#include "vtsdf/shape_mapper.hpp"

namespace vtsdf {
namespace {

// Draws k distinct entries from pool (small k, redraw on collision).
void draw_pixels(const std::vector<int32_t>& pool, int k, Rng& rng,
                 std::vector<int32_t>& out) {
  out.clear();
  if (pool.empty()) return;
  k = std::min<int>(k, int(pool.size()));
  while (int(out.size()) < k) {
    const int32_t p = pool[rng.uniform_int(int(pool.size()))];
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
}

// Ray vs axis-aligned bound box in the object frame; false when no overlap.
bool bound_slab(const FieldConfig& c, const Vec3& o, const Vec3& d,
                double& t_enter, double& t_exit) {
  const Vec3 lo = c.bound_center - Vec3::Constant(0.5 * c.bound_side);
  const Vec3 hi = c.bound_center + Vec3::Constant(0.5 * c.bound_side);
  t_enter = 0.0;
  t_exit = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-12) {
      if (o[k] < lo[k] || o[k] > hi[k]) return false;
      continue;
    }
    double a = (lo[k] - o[k]) / d[k], b = (hi[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t_enter = std::max(t_enter, a);
    t_exit = std::min(t_exit, b);
  }
  return t_exit > t_enter;
}

bool in_bound(const FieldConfig& c, const Vec3& p_obj) {
  const Vec3 d = (p_obj - c.bound_center).cwiseAbs();
  const double h = 0.5 * c.bound_side;
  return d.x() <= h && d.y() <= h && d.z() <= h;
}

}  // namespace

double distance_bound(double measured_ray_depth, double sample_ray_depth) {
  return measured_ray_depth - sample_ray_depth;
}

RaySampleBatch sample_rays(const KeyframeBank& bank,
                           const std::vector<int>& replay,
                           const FieldConfig& field_cfg, Rng& rng,
                           const SampleOptions& opts) {
  require(!replay.empty(), "sample_rays: empty replay set");
  RaySampleBatch batch;
  batch.d_tr = opts.d_tr;
  const double sigma = opts.d_tr / 3.0;

  std::vector<int32_t> px;
  for (int kf_idx : replay) {
    const Keyframe& kf = bank.keyframes.at(size_t(kf_idx));
    const Pose world_to_obj = kf.object_pose.inverse();
    const Mat3 r_wo = world_to_obj.rotation();

    for (size_t f = 0; f < kf.frames.size(); ++f) {
      const SensorFrame& fr = kf.frames[f];
      const bool tactile = fr.model.kind == SensorModel::Kind::Tactile;
      const int per_sensor = bank.replay_batch_per_sensor;
      const int n_free_px =
          tactile ? 0
                  : int(std::lround(per_sensor *
                                    opts.free_space_fraction_vision));
      const int n_surf_px = per_sensor - n_free_px;

      const Mat3 rot = fr.pose_world.rotation();
      const Vec3 origin = fr.pose_world.t;
      const Vec3 o_obj = world_to_obj * origin;

      auto add_ray = [&](int32_t p, bool surface_ray) {
        const int x = p % fr.model.width, y = p / fr.model.width;
        const Vec3 d_cam = pixel_ray(fr.model, x, y);
        const double nrm = d_cam.norm();
        const Vec3 dir = rot * (d_cam / nrm);
        const Vec3 d_obj = r_wo * dir;
        const double t_near = fr.model.near_m * nrm;

        double lo, hi, measured;
        if (surface_ray) {
          measured = double(fr.depth.data[p]) * nrm;
          lo = t_near;
          hi = measured + opts.d_tr;
        } else {
          double t_enter, t_exit;
          if (!bound_slab(field_cfg, o_obj, d_obj, t_enter, t_exit)) return;
          measured = double(fr.scene_depth.data[p]) * nrm;
          lo = std::max(t_enter, t_near);
          // stay a truncation band clear of whatever the scene ray hit: space
          // is only known object-free up to that surface
          hi = std::min(t_exit, measured - 1.001 * opts.d_tr);
        }
        if (hi <= lo) return;

        int n_samples_added = 0;
        auto add_sample = [&](double t) {
          const Vec3 p_obj = o_obj + t * d_obj;
          if (!in_bound(field_cfg, p_obj)) return;
          const double db = distance_bound(measured, t);
          if (db < -opts.d_tr) return;  // beyond the far truncation band
          const bool free = db > opts.d_tr;
          if (free && tactile) return;  // touch supervises the surface band only
          batch.points.push_back(p_obj);
          batch.dist_bound.push_back(db);
          batch.ray_index.push_back(batch.ray_count);
          batch.is_free.push_back(free);
          ++n_samples_added;
        };

        for (int k = 0; k < opts.n_strat; ++k) {
          const double u = (k + rng.uniform()) / double(opts.n_strat);
          add_sample(lo + u * (hi - lo));
        }
        if (surface_ray)
          for (int k = 0; k < opts.n_surf; ++k)
            add_sample(measured + sigma * rng.normal());

        if (n_samples_added > 0) {
          batch.ray_is_tactile.push_back(tactile);
          batch.ray_keyframe.push_back(kf_idx);
          ++batch.ray_count;
        }
      };

      draw_pixels(kf.pools[f].surface, n_surf_px, rng, px);
      for (int32_t p : px) add_ray(p, true);
      if (n_free_px > 0) {
        draw_pixels(kf.pools[f].free, n_free_px, rng, px);
        for (int32_t p : px) add_ray(p, false);
      }
    }
  }
  return batch;
}

}  // namespace vtsdf
