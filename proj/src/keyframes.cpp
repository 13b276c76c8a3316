#include <algorithm>
#include <cmath>

#include "vtsdf/errors.hpp"
#include "vtsdf/shape_mapper.hpp"

namespace vtsdf {
namespace {

constexpr double kMissPenalty = 0.05;  // depth error charged to unrenderable rays
constexpr double kHitEps = 1e-4;
constexpr double kMinStep = 1e-4;

}  // namespace

std::vector<double> render_field_depth(const DistanceField& field,
                                       const Pose& object_pose,
                                       const SensorModel& sensor,
                                       const Pose& sensor_pose,
                                       const std::vector<int32_t>& pixels,
                                       int max_steps) {
  const int n = int(pixels.size());
  std::vector<double> depth(n, std::numeric_limits<double>::quiet_NaN());
  if (n == 0) return depth;

  const Mat3 rot = sensor_pose.rotation();
  std::vector<Vec3> dir(n);      // unit, world
  std::vector<double> norm(n);   // |camera ray| for z <-> euclidean conversion
  std::vector<double> t(n), t_far(n), prev_t(n, 0.0), prev_f(n, 0.0);
  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) {
    const int x = pixels[i] % sensor.width, y = pixels[i] / sensor.width;
    const Vec3 d_cam = pixel_ray(sensor, x + 0.0, y + 0.0);
    norm[i] = d_cam.norm();
    dir[i] = rot * (d_cam / norm[i]);
    t[i] = sensor.near_m * norm[i];
    t_far[i] = sensor.far_m * norm[i];
    active[i] = i;
  }

  std::vector<Vec3> pts;
  VecX vals;
  for (int step = 0; step < max_steps && !active.empty(); ++step) {
    pts.resize(active.size());
    for (size_t k = 0; k < active.size(); ++k)
      pts[k] = sensor_pose.t + t[active[k]] * dir[active[k]];
    field.eval(object_pose, pts, vals, nullptr);

    std::vector<int> next;
    next.reserve(active.size());
    for (size_t k = 0; k < active.size(); ++k) {
      const int i = active[k];
      const double f = vals[long(k)];
      if (f < kHitEps) {
        double t_hit = t[i];
        if (step > 0 && prev_f[i] > f)  // secant refine across the crossing
          t_hit = t[i] - f * (t[i] - prev_t[i]) / (prev_f[i] - f);
        depth[i] = t_hit / norm[i];
        continue;
      }
      prev_t[i] = t[i];
      prev_f[i] = f;
      t[i] += std::max(f, kMinStep);
      if (t[i] > t_far[i]) continue;  // left the sensing range: miss
      next.push_back(i);
    }
    active.swap(next);
  }
  return depth;
}

KeyframeDecision keyframe_decision(const KeyframeBank& bank,
                                   const std::vector<SensorFrame>& candidate,
                                   const DistanceField& field,
                                   const Pose& object_pose, Rng& rng,
                                   int decision_pixels) {
  require(!candidate.empty(), "keyframe_decision: no frames");
  if (bank.empty()) return {true, AcceptReason::First, kMissPenalty};
  const double stamp = candidate.front().stamp;
  require(stamp > bank.last_stamp(),
          "keyframe_decision: candidate not newer than last keyframe");

  // pool mask pixels with valid depth across the candidate's sensors
  std::vector<std::pair<int, int32_t>> pool;  // (frame index, pixel index)
  for (size_t f = 0; f < candidate.size(); ++f) {
    const SensorFrame& fr = candidate[f];
    for (int32_t p = 0; p < int32_t(fr.mask.data.size()); ++p)
      if (fr.mask.data[p] && depth_valid(fr.depth.data[p]))
        pool.emplace_back(int(f), p);
  }

  double loss = kMissPenalty;
  if (!pool.empty()) {
    const int take = std::min<int>(decision_pixels, int(pool.size()));
    for (int i = 0; i < take; ++i)  // partial Fisher-Yates
      std::swap(pool[i], pool[i + rng.uniform_int(int(pool.size()) - i)]);

    double err = 0.0;
    for (size_t f = 0; f < candidate.size(); ++f) {
      std::vector<int32_t> px;
      for (int i = 0; i < take; ++i)
        if (pool[i].first == int(f)) px.push_back(pool[i].second);
      if (px.empty()) continue;
      const SensorFrame& fr = candidate[f];
      const std::vector<double> rendered = render_field_depth(
          field, object_pose, fr.model, fr.pose_world, px);
      for (size_t k = 0; k < px.size(); ++k) {
        const double measured = fr.depth.data[px[k]];
        err += std::isfinite(rendered[k])
                   ? std::min(std::abs(rendered[k] - measured), kMissPenalty)
                   : kMissPenalty;
      }
    }
    loss = err / double(take);
  }

  const double elapsed = stamp - bank.last_stamp();
  if (loss > bank.d_thresh) return {true, AcceptReason::InfoGain, loss};
  if (elapsed >= bank.t_max) return {true, AcceptReason::Forced, loss};
  return {false, AcceptReason::InfoGain, loss};
}

void bank_insert(KeyframeBank& bank, std::vector<SensorFrame> frames,
                 const Pose& object_pose, AcceptReason reason,
                 double initial_render_loss, Rng& rng, int pool_cap_per_frame) {
  require(!frames.empty(), "bank_insert: no frames");
  const double stamp = frames.front().stamp;
  for (const SensorFrame& f : frames)
    require(f.stamp == stamp, "bank_insert: frames at mixed stamps");
  require(bank.empty() || stamp > bank.last_stamp(),
          "bank_insert: stamps must be strictly increasing");

  Keyframe kf;
  kf.stamp = stamp;
  kf.object_pose = object_pose;
  kf.avg_render_loss = std::max(initial_render_loss, 0.0);
  kf.accept_reason = reason;
  kf.pools.resize(frames.size());

  for (size_t f = 0; f < frames.size(); ++f) {
    const SensorFrame& fr = frames[f];
    auto reservoir = [&](std::vector<int32_t>& out, auto&& keep) {
      int seen = 0;
      for (int32_t p = 0; p < int32_t(fr.mask.data.size()); ++p) {
        if (!keep(p)) continue;
        if (seen < pool_cap_per_frame) {
          out.push_back(p);
        } else {
          const int j = rng.uniform_int(seen + 1);
          if (j < pool_cap_per_frame) out[j] = p;
        }
        ++seen;
      }
    };
    reservoir(kf.pools[f].surface, [&](int32_t p) {
      return fr.mask.data[p] && depth_valid(fr.depth.data[p]);
    });
    if (fr.model.kind == SensorModel::Kind::Vision)
      reservoir(kf.pools[f].free, [&](int32_t p) {
        return !fr.mask.data[p] && depth_valid(fr.scene_depth.data[p]);
      });
  }
  kf.frames = std::move(frames);
  bank.keyframes.push_back(std::move(kf));
}

std::vector<int> select_replay(const KeyframeBank& bank, Rng& rng,
                               int replay_size) {
  require(!bank.empty(), "select_replay: empty bank");
  const int n = int(bank.keyframes.size());
  if (n <= 2 || replay_size <= 2) {
    std::vector<int> all;
    for (int i = std::max(0, n - std::max(replay_size, 1)); i < n; ++i)
      all.push_back(i);
    return all;
  }

  const int extra = std::min(replay_size - 2, n - 2);
  std::vector<int> candidates;
  std::vector<double> weight;
  for (int i = 0; i < n - 2; ++i) {
    candidates.push_back(i);
    weight.push_back(bank.keyframes[i].avg_render_loss + 1e-6);
  }

  std::vector<int> picked;
  for (int k = 0; k < extra; ++k) {  // weighted, without replacement
    double total = 0.0;
    for (double w : weight) total += w;
    double r = rng.uniform() * total;
    size_t j = 0;
    for (; j + 1 < candidates.size(); ++j) {
      r -= weight[j];
      if (r < 0.0) break;
    }
    picked.push_back(candidates[j]);
    candidates.erase(candidates.begin() + long(j));
    weight.erase(weight.begin() + long(j));
  }
  std::sort(picked.begin(), picked.end());
  picked.push_back(n - 2);
  picked.push_back(n - 1);
  return picked;
}

}  // namespace vtsdf
