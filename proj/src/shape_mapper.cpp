#include <algorithm>
#include <bit>
#include <cmath>

#include "vtsdf/errors.hpp"
#include "vtsdf/shape_mapper.hpp"

namespace vtsdf {

ShapeLoss shape_loss(const FieldParams& params, const RaySampleBatch& batch,
                     FieldBatch& workspace, GradAccumulator& acc, double w_tr,
                     std::vector<double>* per_ray_trunc_loss) {
  require(batch.size() > 0, "shape_loss: empty batch");
  acc.ensure(params);
  acc.clear(params);

  const VecX& f = workspace.forward(params, Pose{}, batch.points);

  // per-ray sample counts for the two-level (ray, sample) mean
  std::vector<int> n_free(batch.ray_count, 0), n_tr(batch.ray_count, 0);
  for (int i = 0; i < batch.size(); ++i)
    ++(batch.is_free[i] ? n_free : n_tr)[batch.ray_index[i]];
  int rays_free = 0, rays_tr = 0;
  for (int r = 0; r < batch.ray_count; ++r) {
    rays_free += n_free[r] > 0;
    rays_tr += n_tr[r] > 0;
  }

  std::vector<double> ray_free_sum(batch.ray_count, 0.0);
  std::vector<double> ray_tr_sum(batch.ray_count, 0.0);
  VecX upstream(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    const int r = batch.ray_index[i];
    const double target = batch.is_free[i] ? batch.d_tr : batch.dist_bound[i];
    const double res = f[i] - target;
    const double sgn = (res > 0.0) - (res < 0.0);
    if (batch.is_free[i]) {
      ray_free_sum[r] += std::abs(res);
      upstream[i] = sgn / (double(rays_free) * n_free[r]);
    } else {
      ray_tr_sum[r] += std::abs(res);
      upstream[i] = w_tr * sgn / (double(rays_tr) * n_tr[r]);
    }
  }

  ShapeLoss out;
  out.n_rays = batch.ray_count;
  out.n_samples = batch.size();
  for (int r = 0; r < batch.ray_count; ++r) {
    if (n_free[r] > 0) out.free += ray_free_sum[r] / n_free[r] / rays_free;
    if (n_tr[r] > 0) out.trunc += ray_tr_sum[r] / n_tr[r] / rays_tr;
  }
  out.total = out.free + w_tr * out.trunc;

  workspace.backward_params(params, upstream, acc);

  if (per_ray_trunc_loss) {
    per_ray_trunc_loss->assign(batch.ray_count, 0.0);
    for (int r = 0; r < batch.ray_count; ++r)
      (*per_ray_trunc_loss)[r] = n_tr[r] > 0 ? ray_tr_sum[r] / n_tr[r]
                                             : ray_free_sum[r] / std::max(n_free[r], 1);
  }
  return out;
}

ShapeMapper::ShapeMapper(const FieldConfig& field_cfg, const MapperConfig& cfg)
    : cfg_(cfg),
      params_(field_init(field_cfg, seed_mix(cfg.seed, hash_str("field-init")))),
      field_view_(&params_) {
  acc_.ensure(params_);
}

KeyframeDecision ShapeMapper::consider(const std::vector<SensorFrame>& frames,
                                       const Pose& object_pose) {
  require(!frames.empty(), "mapper: no frames");
  Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("kf-decision")),
                   std::bit_cast<uint64_t>(frames.front().stamp)));
  return keyframe_decision(bank_, frames, field_view_, object_pose, rng,
                           cfg_.decision_pixels);
}

void ShapeMapper::insert(std::vector<SensorFrame> frames,
                         const Pose& object_pose,
                         const KeyframeDecision& decision) {
  Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("kf-pools")),
                   std::bit_cast<uint64_t>(frames.front().stamp)));
  bank_insert(bank_, std::move(frames), object_pose, decision.reason,
              decision.render_loss, rng);
}

MapperDiag ShapeMapper::iterate_once(const std::vector<int>& replay, Rng& rng) {
  MapperDiag diag;
  diag.iteration = iteration_;
  diag.keyframes = int(bank_.keyframes.size());

  RaySampleBatch batch = sample_rays(bank_, replay, params_.cfg, rng,
                                     cfg_.sampling);
  ++iteration_;
  if (batch.size() == 0) return diag;  // degenerate frame set; nothing to fit

  std::vector<double> per_ray;
  diag.loss = shape_loss(params_, batch, batch_, acc_, cfg_.weights.w_tr,
                         &per_ray);
  adam_step(params_, adam_, acc_.g);

  // refresh per-keyframe average rendering loss (EMA over surface error)
  std::vector<double> kf_sum(bank_.keyframes.size(), 0.0);
  std::vector<int> kf_n(bank_.keyframes.size(), 0);
  for (int r = 0; r < batch.ray_count; ++r) {
    kf_sum[size_t(batch.ray_keyframe[r])] += per_ray[size_t(r)];
    ++kf_n[size_t(batch.ray_keyframe[r])];
  }
  for (size_t k = 0; k < bank_.keyframes.size(); ++k)
    if (kf_n[k] > 0) {
      double& avg = bank_.keyframes[k].avg_render_loss;
      avg = (1.0 - cfg_.ema_alpha) * avg + cfg_.ema_alpha * (kf_sum[k] / kf_n[k]);
    }
  return diag;
}

MapperDiag ShapeMapper::iterate() {
  require(!bank_.empty(), "mapper: iterate with empty bank");
  if (!bootstrapped_) {
    bootstrapped_ = true;
    const std::vector<int> first = {0};
    for (int i = 0; i < cfg_.bootstrap_iters; ++i) {
      Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("map-iter")),
                       uint64_t(iteration_)));
      iterate_once(first, rng);
    }
    Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("map-iter")),
                     uint64_t(iteration_)));
    MapperDiag diag = iterate_once(select_replay(bank_, rng, cfg_.replay_size),
                                   rng);
    diag.bootstrapped = true;
    return diag;
  }
  Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("map-iter")),
                   uint64_t(iteration_)));
  return iterate_once(select_replay(bank_, rng, cfg_.replay_size), rng);
}

void ShapeMapper::update_keyframe_pose(double stamp, const Pose& pose) {
  for (Keyframe& kf : bank_.keyframes)
    if (kf.stamp == stamp) {
      kf.object_pose = pose;
      return;
    }
}

}  // namespace vtsdf
