#include "vtsdf/bake.hpp"

#include <cmath>
#include <cstdio>

#include "vtsdf/adam.hpp"
#include "vtsdf/errors.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {
namespace {

Vec3 uniform_in_bound(const FieldConfig& c, Rng& rng) {
  Vec3 p;
  for (int k = 0; k < 3; ++k)
    p[k] = c.bound_center[k] + (rng.uniform() - 0.5) * c.bound_side;
  return p;
}

bool in_bound(const FieldConfig& c, const Vec3& p) {
  const Vec3 d = (p - c.bound_center).cwiseAbs();
  const double h = 0.5 * c.bound_side;
  return d.x() <= h && d.y() <= h && d.z() <= h;
}

// Mixed sample pool: a fraction projected onto the surface and jittered along
// the normal, the rest uniform. Targets are exact signed distances.
void fill_pool(const FieldConfig& c, const GroundTruthShape& shape,
               const BakeOptions& opts, int count, Rng& rng,
               std::vector<Vec3>& pts, std::vector<double>& targets) {
  pts.clear();
  targets.clear();
  pts.reserve(count);
  targets.reserve(count);
  while (int(pts.size()) < count) {
    Vec3 p = uniform_in_bound(c, rng);
    const bool near_surface =
        rng.uniform() < opts.surface_fraction;
    if (near_surface) {
      for (int it = 0; it < 2; ++it)
        p -= gt_sdf(shape, p) * gt_normal(shape, p);
      p += gt_normal(shape, p) * (rng.normal() * opts.surface_sigma);
      if (!in_bound(c, p)) continue;
    }
    pts.push_back(p);
    targets.push_back(gt_sdf(shape, p));
  }
}

double heldout_mae(const FieldParams& params, FieldBatch& batch,
                   const std::vector<Vec3>& pts,
                   const std::vector<double>& targets) {
  const VecX& v = batch.forward(params, Pose{}, pts);
  double acc = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    acc += std::abs(v[long(i)] - targets[i]);
  return acc / double(pts.size());
}

}  // namespace

BakeResult bake_field_from_shape(const FieldConfig& cfg,
                                 const GroundTruthShape& shape,
                                 const BakeOptions& opts) {
  require(opts.batch_size > 0 && opts.pool_size > 0 && opts.heldout_size > 0,
          "bake: bad sample counts");
  Rng rng(seed_mix(opts.seed, hash_str("bake")));

  std::vector<Vec3> pool, held;
  std::vector<double> pool_sdf, held_sdf;
  fill_pool(cfg, shape, opts, opts.pool_size, rng, pool, pool_sdf);
  fill_pool(cfg, shape, opts, opts.heldout_size, rng, held, held_sdf);

  BakeResult out;
  out.params = field_init(cfg, seed_mix(opts.seed, hash_str("bake-init")));
  AdamState adam;
  adam.lr = opts.lr;
  FieldBatch batch;
  GradAccumulator acc;
  acc.ensure(out.params);

  std::vector<Vec3> bp(opts.batch_size);
  VecX upstream(opts.batch_size);
  const double initial = heldout_mae(out.params, batch, held, held_sdf);
  double best = initial;

  for (int step = 1; step <= opts.max_steps; ++step) {
    std::vector<double> bt(opts.batch_size);
    for (int i = 0; i < opts.batch_size; ++i) {
      const size_t j = size_t(rng.uniform_int(int(pool.size())));
      bp[i] = pool[j];
      bt[i] = pool_sdf[j];
    }
    const VecX& v = batch.forward(out.params, Pose{}, bp);
    for (int i = 0; i < opts.batch_size; ++i) {
      const double r = v[i] - bt[i];
      upstream[i] = (r > 0.0) - (r < 0.0);
    }
    upstream /= double(opts.batch_size);
    acc.clear(out.params);
    batch.backward_params(out.params, upstream, acc);
    adam_step(out.params, adam, acc.g);

    if (step % opts.eval_every == 0 || step == opts.max_steps) {
      const double mae = heldout_mae(out.params, batch, held, held_sdf);
      if (opts.verbose)
        std::fprintf(stderr, "bake step %d heldout mae %.6f\n", step, mae);
      if (!std::isfinite(mae) || mae > 10.0 * initial + 1.0)
        throw FitDiverged("bake: held-out error diverged");
      best = std::min(best, mae);
      out.heldout_mae = mae;
      out.steps = step;
      if (mae <= opts.target_mae) return out;
    }
  }
  return out;
}

}  // namespace vtsdf
