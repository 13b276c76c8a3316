#include <cmath>
#include <utility>

#include "vtsdf/errors.hpp"
#include "vtsdf/pose_tracker.hpp"

namespace vtsdf {
namespace {

struct Stacked {
  MatX jac;   // sqrt-weight scaled
  VecX res;   // sqrt-weight scaled
  double sdf_abs_sum = 0.0;  // unweighted, for the lost check
  int sdf_rows = 0, icp_rows = 0, reg_rows = 0;
};

void append_weighted(Stacked& s, Residual&& r, double weight, bool robust,
                     double huber_delta, int& cursor) {
  const int rows = int(r.values.size());
  const double sw = std::sqrt(weight);
  for (int i = 0; i < rows; ++i) {
    double scale = sw;
    if (robust) {
      const double a = std::abs(r.values[i]);
      if (a > huber_delta) scale *= std::sqrt(huber_delta / a);
    }
    s.res[cursor + i] = scale * r.values[i];
    s.jac.row(cursor + i) = scale * r.jacobian.row(i);
  }
  cursor += rows;
}

Stacked build_system(const PoseWindow& window, const DistanceField& field,
                     const SdfMeasurements& sdf_meas,
                     const IcpMeasurements& icp_meas,
                     const TrackerConfig& cfg) {
  const int n = int(window.entries.size());
  Residual sdf = sdf_residual(window, field, sdf_meas);
  Residual icp = icp_residual(window, icp_meas);
  const bool with_reg = n >= 2;
  Residual reg;
  if (with_reg) reg = reg_residual(window);

  Stacked s;
  s.sdf_rows = int(sdf.values.size());
  s.icp_rows = int(icp.values.size());
  s.reg_rows = int(reg.values.size());
  s.sdf_abs_sum = sdf.values.cwiseAbs().sum();

  const int total = s.sdf_rows + s.icp_rows + s.reg_rows;
  s.res.resize(total);
  s.jac.resize(total, 6 * n);
  int cursor = 0;
  append_weighted(s, std::move(sdf), cfg.weights.w_sdf, cfg.use_huber,
                  cfg.huber_delta, cursor);
  append_weighted(s, std::move(icp), cfg.weights.w_icp, cfg.use_huber,
                  cfg.huber_delta, cursor);
  if (with_reg)
    append_weighted(s, std::move(reg), cfg.weights.w_reg, false,
                    cfg.huber_delta, cursor);
  return s;
}

void set_poses(PoseWindow& window, const std::vector<Pose>& poses) {
  for (size_t i = 0; i < poses.size(); ++i)
    window.entries[i].pose = poses[i];
}

std::vector<Pose> get_poses(const PoseWindow& window) {
  std::vector<Pose> out;
  out.reserve(window.entries.size());
  for (const WindowFrame& e : window.entries) out.push_back(e.pose);
  return out;
}

}  // namespace

LmReport lm_solve(PoseWindow& window, const DistanceField& field,
                  const SdfMeasurements& sdf_meas,
                  const IcpMeasurements& icp_meas, const TrackerConfig& cfg) {
  const int n = int(window.entries.size());
  require(n >= 1, "lm_solve: empty window");
  require(int(sdf_meas.points_world.size()) == n,
          "lm_solve: measurement/window size mismatch");

  const std::vector<Pose> initial = get_poses(window);
  std::vector<Pose> best = initial;

  LmReport rep;
  Stacked cur = build_system(window, field, sdf_meas, icp_meas, cfg);
  rep.sdf_rows = cur.sdf_rows;
  rep.icp_rows = cur.icp_rows;
  rep.reg_rows = cur.reg_rows;
  double cost = cur.res.squaredNorm();
  rep.cost_initial = cost;
  rep.cost_final = cost;
  if (cur.res.size() == 0) {  // nothing to constrain the window
    rep.singular = true;
    return rep;
  }

  double lambda = cfg.lm_damping_init;
  while (rep.iterations < cfg.lm_iters && cost > 1e-18) {
    const MatX h = cur.jac.transpose() * cur.jac;
    const VecX g = cur.jac.transpose() * cur.res;
    const double floor = 1e-12 * h.diagonal().maxCoeff();

    MatX damped = h;
    damped.diagonal() += lambda * (h.diagonal().array() + floor).matrix();
    Eigen::LDLT<MatX> ldlt(damped);
    VecX delta;
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
      delta = ldlt.solve(-g);
      ok = delta.allFinite();
    }
    ++rep.iterations;
    if (!ok) {
      lambda *= 10.0;
      if (lambda > cfg.lm_damping_max) {  // not PD even at max damping
        set_poses(window, initial);
        rep.singular = true;
        rep.cost_final = rep.cost_initial;
        Stacked fin = build_system(window, field, sdf_meas, icp_meas, cfg);
        rep.mean_sdf_residual =
            fin.sdf_rows > 0 ? fin.sdf_abs_sum / fin.sdf_rows : 0.0;
        return rep;
      }
      continue;
    }

    std::vector<Pose> candidate = best;
    for (int k = 0; k < n; ++k)
      candidate[size_t(k)] =
          candidate[size_t(k)] *
          se3_exp(Twist::from_vec(cfg.lm_step * delta.segment<6>(6 * k)));
    set_poses(window, candidate);
    Stacked cand = build_system(window, field, sdf_meas, icp_meas, cfg);
    const double cand_cost = cand.res.squaredNorm();

    if (std::isfinite(cand_cost) && cand_cost < cost) {
      ++rep.accepted;
      best = std::move(candidate);
      cur = std::move(cand);
      lambda = std::max(lambda * 0.5, 1e-12);
      const double drop = cost - cand_cost;
      cost = cand_cost;
      if (drop < 1e-6 * std::max(cost, 1e-300)) break;
    } else {
      set_poses(window, best);
      lambda *= 10.0;
      if (lambda > cfg.lm_damping_max) break;  // stalled at current best
    }
  }

  set_poses(window, best);
  rep.cost_final = cost;
  rep.mean_sdf_residual =
      cur.sdf_rows > 0 ? cur.sdf_abs_sum / cur.sdf_rows : 0.0;
  return rep;
}

PoseTracker::PoseTracker(const TrackerConfig& cfg, const Pose& initial_pose)
    : cfg_(cfg), initial_pose_(initial_pose) {
  require(cfg.window >= 1, "PoseTracker: window must be positive");
  require(cfg.solves_per_step >= 1, "PoseTracker: need at least one solve");
  window_.max_size = cfg.window;
}

Pose PoseTracker::predict_next() const {
  const auto& e = window_.entries;
  if (e.empty()) return initial_pose_;
  if (e.size() == 1) return e.back().pose;
  const Pose& prev = e[e.size() - 2].pose;
  const Pose& last = e.back().pose;
  return last * (prev.inverse() * last);  // constant velocity
}

const Pose& PoseTracker::current_pose() const {
  require(!window_.entries.empty(), "PoseTracker: no frames tracked yet");
  return window_.entries.back().pose;
}

TrackStepDiag PoseTracker::step(double stamp,
                                const std::vector<SensorFrame>& frames,
                                const DistanceField& field) {
  require(!frames.empty(), "PoseTracker::step: no sensor frames");
  require(window_.entries.empty() || stamp > window_.entries.back().stamp,
          "PoseTracker::step: stamps must increase");

  const Pose pred = predict_next();
  window_.entries.push_back({stamp, frames, pred});
  if (int(window_.entries.size()) > window_.max_size)
    window_.entries.erase(window_.entries.begin());
  const std::vector<Pose> pre_solve = get_poses(window_);

  TrackStepDiag diag;
  diag.stamp = stamp;
  for (int s = 0; s < cfg_.solves_per_step; ++s) {
    Rng rng(seed_mix(seed_mix(cfg_.seed, hash_str("track-step")),
                     seed_mix(uint64_t(step_count_), uint64_t(s))));
    const SdfMeasurements sdf_meas = sample_sdf_measurements(
        window_, rng, cfg_.sdf_rays_per_frame, cfg_.min_sdf_pixels);
    const IcpMeasurements icp_meas =
        build_icp_measurements(window_, field, cfg_);
    const LmReport rep = lm_solve(window_, field, sdf_meas, icp_meas, cfg_);

    diag.lm_iterations += rep.iterations;
    diag.singular = diag.singular || rep.singular;
    if (s == 0) diag.cost_initial = rep.cost_initial;
    diag.cost_final = rep.cost_final;
    diag.mean_sdf_residual = rep.mean_sdf_residual;
    diag.sdf_rows = rep.sdf_rows;
    diag.icp_rows = rep.icp_rows;
    diag.reg_rows = rep.reg_rows;
  }

  // Lost when the solve could not anchor the window absolutely (no usable
  // surface pixels / singular system) or left a gross misfit; fall back to
  // the motion-model poses.
  if (diag.singular || diag.sdf_rows == 0 ||
      diag.mean_sdf_residual > cfg_.lost_mean_residual) {
    diag.lost = true;
    set_poses(window_, pre_solve);
  }
  diag.pose = window_.entries.back().pose;
  ++step_count_;
  return diag;
}

}  // namespace vtsdf
