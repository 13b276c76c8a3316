#pragma once

#include <cstdint>
#include <vector>

#include "vtsdf/geometry.hpp"
#include "vtsdf/mesh.hpp"

namespace vtsdf {

struct MetricsConfig {
  double tau = 0.005;             // meters; F-score distance threshold
  int samples = 10000;            // surface samples per mesh
  double failure_thresh = 0.010;  // meters; mean drift above this fails a run
  double grace_period = 5.0;      // seconds ignored at the sequence start
  uint64_t seed = 0;              // sampling stream

  void validate() const;
};

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;  // harmonic mean; 0 when precision + recall == 0
};

enum class CoverageLabel : uint8_t { Vision, Touch, Hallucinated };

struct TimedPose {
  double stamp = 0.0;
  Pose pose;
};

// Closest-point pose drift: mean, over seeded area-weighted samples of the
// mesh surface, of the distance from each sample under est_pose to the
// surface under gt_pose. Zero under any self-symmetry of the mesh.
double add_s(const TriangleMesh& gt_mesh, const Pose& est_pose,
             const Pose& gt_pose, const MetricsConfig& cfg);

// Precision: reconstructed samples within tau of the reference surface.
// Recall: reference samples within tau of the reconstruction. Distances are
// point-to-triangle; both meshes sample from the same seed, so
// fscore(a, b).precision == fscore(b, a).recall exactly.
FScore fscore(const TriangleMesh& gt_mesh, const TriangleMesh& recon_mesh,
              double tau, int samples, uint64_t seed = 0);

// One sampling pass thresholded at several tau values.
std::vector<FScore> fscore_curve(const TriangleMesh& gt_mesh,
                                 const TriangleMesh& recon_mesh,
                                 const std::vector<double>& taus, int samples,
                                 uint64_t seed = 0);

// Per-vertex provenance: the nearest measurement within radius wins, vision
// on ties; vertices with no measurement nearby are hallucinated.
std::vector<CoverageLabel> coverage_labels(const TriangleMesh& mesh,
                                           const std::vector<Vec3>& vision_cloud,
                                           const std::vector<Vec3>& touch_cloud,
                                           double radius = 0.005);

struct DriftReport {
  std::vector<double> stamps;  // steps kept after the grace period
  std::vector<double> add_s;   // meters, per kept step
  double mean = 0.0;
  bool failed = false;  // mean exceeded the failure threshold
};

// Per-step pose drift after the grace period; both trajectories must carry
// the same stamp sequence.
DriftReport drift_report(const std::vector<TimedPose>& est,
                         const std::vector<TimedPose>& gt,
                         const TriangleMesh& gt_mesh, const MetricsConfig& cfg);

// Shape + pose evaluation bundle assembled by the experiment runners.
struct ReconReport {
  DriftReport drift;
  FScore final_fscore;  // at cfg.tau
  std::vector<double> tau_sweep;
  std::vector<FScore> fscore_sweep;
  std::vector<CoverageLabel> coverage;  // per final-mesh vertex
};

}  // namespace vtsdf
