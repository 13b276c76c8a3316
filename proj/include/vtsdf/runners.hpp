#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vtsdf/experiment.hpp"
#include "vtsdf/metrics.hpp"
#include "vtsdf/sequence_io.hpp"

namespace vtsdf {

// Per-run wall-clock accounting. The run loop brackets every phase, so the
// bucket sum tracks `total` to within loop overhead (< 5%). Report writing
// happens after the run and is not counted.
struct StageTimings {
  double render = 0, corrupt = 0, track = 0, map = 0, extract = 0, eval = 0,
         io = 0;
  double total = 0;

  double stage_sum() const {
    return render + corrupt + track + map + extract + eval + io;
  }
};

// One trajectory row: pose estimate vs truth plus solver/factor diagnostics.
struct StepLog {
  double stamp = 0;
  Pose est, gt;
  bool lost = false, singular = false;
  double mean_sdf_residual = 0;
  int lm_iterations = 0;
  int sdf_rows = 0, icp_rows = 0, reg_rows = 0;
  int vision_frames = 0, tactile_frames = 0;
  int keyframes = 0;        // bank size after this step (slam only)
  int64_t shape_iters = 0;  // cumulative field iterations (slam only)
};

struct RunResult {
  std::vector<StepLog> steps;
  ReconReport recon;  // drift always; shape scores when a mesh was built
  TriangleMesh final_mesh;
  std::vector<std::pair<double, TriangleMesh>> checkpoints;  // (stamp, mesh)
  StageTimings timings;
  int lost_steps = 0;

  std::vector<TimedPose> est_trajectory() const;
  std::vector<TimedPose> gt_trajectory() const;
};

struct OcclusionRow {
  int viewpoint = 0;
  Vec3 cam_position = Vec3::Zero();
  double score = 0;  // normalized mask area: 0 most occluded, 1 least
  double add_s_vision_only = 0, add_s_visuo_tactile = 0;
  double improvement_pct = 0;  // 100 * (vision - fused) / vision
  int lost_vision_only = 0, lost_visuo_tactile = 0;
};

struct OcclusionTable {
  std::vector<OcclusionRow> rows;
  double mean_improvement_pct = 0;
};

struct NoiseRow {
  double factor_d = 0;
  Modality modality = Modality::VisionOnly;
  double mean_add_s = 0, max_add_s = 0;
  int lost_steps = 0;
  bool failed = false;
};

struct NoiseTable {
  std::vector<NoiseRow> rows;
};

// Keyed store of rendered sequences so sweeps (seeds, noise factors,
// modalities) reuse one render; rendering consumes no RNG, so a cache hit
// cannot change results.
struct SequenceCache {
  std::map<std::string, std::vector<SequenceStep>> entries;
};

// Noiseless multi-sensor stream for the configured scene, snapped to the
// container grid (so live runs match record/playback runs bit for bit).
// camera_override replaces the rig's vision pose (occlusion-sphere sweeps).
std::vector<SequenceStep> simulate_sequence(const ExperimentConfig& cfg,
                                            const Pose* camera_override =
                                                nullptr);

// Frozen field for known-shape runs: loads bake.field_path when present,
// otherwise bakes from the object (saving to field_path when set); analytic
// substitutes the exact signed distance.
struct KnownField {
  std::shared_ptr<const FieldParams> params;  // null when analytic
  std::shared_ptr<const DistanceField> field;
};
KnownField obtain_known_field(const ExperimentConfig& cfg);

// Joint tracking + mapping: per step, corrupt -> pose solves -> keyframe
// bookkeeping -> field iterations; periodic mesh checkpoints; final drift,
// F-score sweep and coverage report. TrackingLost is recorded, never fatal.
RunResult run_slam(const ExperimentConfig& cfg, uint64_t seed,
                   SequenceCache* cache = nullptr);

// Pose tracking against a frozen known-shape field; drift report only.
RunResult run_tracking(const ExperimentConfig& cfg, uint64_t seed,
                       SequenceCache* cache = nullptr);

// Static multi-view fit: every view becomes a keyframe, then fit.iterations
// field updates; shape scores against the reference mesh.
RunResult run_fit_static(const ExperimentConfig& cfg, uint64_t seed);

// Known-shape tracking from every sphere viewpoint, vision-only vs
// visuo-tactile, with per-viewpoint occlusion scores and improvement.
OcclusionTable run_ablate_occlusion(const ExperimentConfig& cfg, uint64_t seed,
                                    SequenceCache* cache = nullptr);

// Known-shape tracking across noise magnitudes and modalities; one shared
// noiseless render, corruption applied per run. Tactile frames bypass
// corruption by construction.
NoiseTable run_ablate_noise(const ExperimentConfig& cfg, uint64_t seed,
                            SequenceCache* cache = nullptr);

// --- report emission ---------------------------------------------------------
// CSV columns are documented in the README; all values use exact shortest
// decimals, so identical runs give identical bytes (timings.csv excepted:
// it holds measured wall clock).

void write_trajectory_csv(const std::string& path,
                          const std::vector<StepLog>& steps);
std::vector<TimedPose> read_trajectory_csv(const std::string& path,
                                           bool estimated);
void write_drift_csv(const std::string& path, const DriftReport& drift);
void write_fscore_csv(const std::string& path, const std::vector<double>& taus,
                      const std::vector<FScore>& scores);
void write_coverage_csv(const std::string& path,
                        const std::vector<CoverageLabel>& labels);
void write_timings_csv(const std::string& path, const StageTimings& t);
void write_occlusion_csv(const std::string& path, const OcclusionTable& table);
void write_noise_csv(const std::string& path, const NoiseTable& table);

// config.json echo, trajectory/drift/fscore/coverage/summary/timings CSVs,
// final + checkpoint meshes (PLY) under dir.
void write_run_outputs(const std::string& dir, const ExperimentConfig& cfg,
                       uint64_t seed, const RunResult& run);

}  // namespace vtsdf
