#include "vtsdf/metrics.hpp"

#include <cmath>
#include <limits>

#include "vtsdf/errors.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {
namespace {

// Distances from samples of `probe` to the surface of `target`.
std::vector<double> sample_to_surface(const TriangleMesh& probe,
                                      const MeshDistanceGrid& target,
                                      int samples, uint64_t seed) {
  Rng rng(seed);
  const std::vector<Vec3> pts = sample_mesh_points(probe, samples, rng);
  std::vector<double> d(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) d[i] = target.distance(pts[i]);
  return d;
}

double within(const std::vector<double>& d, double tau) {
  if (d.empty()) return 0.0;
  size_t hit = 0;
  for (double v : d) hit += v <= tau;
  return double(hit) / double(d.size());
}

FScore make_fscore(double precision, double recall) {
  FScore s;
  s.precision = precision;
  s.recall = recall;
  s.f = precision + recall > 0.0
            ? 2.0 * precision * recall / (precision + recall)
            : 0.0;
  return s;
}

}  // namespace

void MetricsConfig::validate() const {
  require(tau > 0.0, "MetricsConfig: tau must be positive");
  require(samples > 0, "MetricsConfig: samples must be positive");
  require(failure_thresh > 0.0, "MetricsConfig: failure_thresh must be positive");
  require(grace_period >= 0.0, "MetricsConfig: grace_period must be >= 0");
}

double add_s(const TriangleMesh& gt_mesh, const Pose& est_pose,
             const Pose& gt_pose, const MetricsConfig& cfg) {
  cfg.validate();
  if (gt_mesh.empty()) throw EmptyMesh("add_s: empty mesh");
  Rng rng(cfg.seed);
  const std::vector<Vec3> pts = sample_mesh_points(gt_mesh, cfg.samples, rng);
  const MeshDistanceGrid grid(gt_mesh);
  // Distance in the world frame equals distance of the relative-posed point
  // to the surface in the object frame.
  const Pose rel = gt_pose.inverse() * est_pose;
  double sum = 0.0;
  for (const Vec3& p : pts) sum += grid.distance(rel * p);
  return sum / double(pts.size());
}

FScore fscore(const TriangleMesh& gt_mesh, const TriangleMesh& recon_mesh,
              double tau, int samples, uint64_t seed) {
  return fscore_curve(gt_mesh, recon_mesh, {tau}, samples, seed).front();
}

std::vector<FScore> fscore_curve(const TriangleMesh& gt_mesh,
                                 const TriangleMesh& recon_mesh,
                                 const std::vector<double>& taus, int samples,
                                 uint64_t seed) {
  require(samples > 0, "fscore: samples must be positive");
  for (double tau : taus) require(tau > 0.0, "fscore: tau must be positive");
  if (gt_mesh.empty() || recon_mesh.empty()) throw EmptyMesh("fscore: empty mesh");
  const MeshDistanceGrid gt_grid(gt_mesh);
  const MeshDistanceGrid recon_grid(recon_mesh);
  const std::vector<double> d_recon =
      sample_to_surface(recon_mesh, gt_grid, samples, seed);
  const std::vector<double> d_gt =
      sample_to_surface(gt_mesh, recon_grid, samples, seed);
  std::vector<FScore> out;
  out.reserve(taus.size());
  for (double tau : taus)
    out.push_back(make_fscore(within(d_recon, tau), within(d_gt, tau)));
  return out;
}

std::vector<CoverageLabel> coverage_labels(const TriangleMesh& mesh,
                                           const std::vector<Vec3>& vision_cloud,
                                           const std::vector<Vec3>& touch_cloud,
                                           double radius) {
  require(radius > 0.0, "coverage_labels: radius must be positive");
  const double kFar = std::numeric_limits<double>::infinity();
  PointGrid vision, touch;
  if (!vision_cloud.empty()) vision = PointGrid(vision_cloud);
  if (!touch_cloud.empty()) touch = PointGrid(touch_cloud);

  std::vector<CoverageLabel> labels(mesh.vertices.size(),
                                    CoverageLabel::Hallucinated);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    const double dv = vision_cloud.empty() ? kFar : vision.nn_distance(v);
    const double dt = touch_cloud.empty() ? kFar : touch.nn_distance(v);
    if (std::min(dv, dt) > radius) continue;
    labels[i] = dv <= dt ? CoverageLabel::Vision : CoverageLabel::Touch;
  }
  return labels;
}

DriftReport drift_report(const std::vector<TimedPose>& est,
                         const std::vector<TimedPose>& gt,
                         const TriangleMesh& gt_mesh,
                         const MetricsConfig& cfg) {
  cfg.validate();
  if (gt_mesh.empty()) throw EmptyMesh("drift_report: empty mesh");
  if (est.size() != gt.size())
    throw StampMismatch("drift_report: trajectory lengths differ");
  for (size_t i = 0; i < est.size(); ++i)
    if (std::abs(est[i].stamp - gt[i].stamp) > 1e-9)
      throw StampMismatch("drift_report: stamps differ at step " +
                          std::to_string(i));

  // Shared samples and distance grid; per step this equals add_s exactly.
  Rng rng(cfg.seed);
  const std::vector<Vec3> pts = sample_mesh_points(gt_mesh, cfg.samples, rng);
  const MeshDistanceGrid grid(gt_mesh);

  DriftReport rep;
  const double t0 = est.empty() ? 0.0 : est.front().stamp;
  for (size_t i = 0; i < est.size(); ++i) {
    if (est[i].stamp - t0 < cfg.grace_period - 1e-9) continue;
    const Pose rel = gt[i].pose.inverse() * est[i].pose;
    double sum = 0.0;
    for (const Vec3& p : pts) sum += grid.distance(rel * p);
    rep.stamps.push_back(est[i].stamp);
    rep.add_s.push_back(sum / double(pts.size()));
    rep.mean += rep.add_s.back();
  }
  if (!rep.add_s.empty()) rep.mean /= double(rep.add_s.size());
  rep.failed = rep.mean > cfg.failure_thresh;
  return rep;
}

}  // namespace vtsdf
