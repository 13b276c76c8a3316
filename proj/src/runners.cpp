#include "vtsdf/runners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vtsdf/bake.hpp"
#include "vtsdf/errors.hpp"
#include "vtsdf/field_io.hpp"
#include "vtsdf/mesh.hpp"
#include "vtsdf/rng.hpp"

namespace vtsdf {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Accumulates the enclosed scope's wall clock into one StageTimings slot.
class StageTimer {
 public:
  explicit StageTimer(double& slot) : slot_(slot), t0_(Clock::now()) {}
  ~StageTimer() { slot_ += seconds_since(t0_); }
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  double& slot_;
  Clock::time_point t0_;
};

uint64_t substream(uint64_t run_seed, const char* tag) {
  return seed_mix(run_seed, hash_str(tag));
}

std::vector<SensorFrame> filter_modality(const std::vector<SensorFrame>& frames,
                                         Modality m) {
  std::vector<SensorFrame> out;
  out.reserve(frames.size());
  for (const SensorFrame& f : frames) {
    const bool tactile = f.model.kind == SensorModel::Kind::Tactile;
    if (m == Modality::VisionOnly && tactile) continue;
    if (m == Modality::TactileOnly && !tactile) continue;
    out.push_back(f);
  }
  return out;
}

// Vision frames only: tactile gels sit on the surface and keep their
// sub-millimeter readings regardless of the vision noise magnitude.
void corrupt_vision(std::vector<SensorFrame>& frames, const NoiseConfig& noise) {
  if (noise.factor_D == 0) return;
  for (SensorFrame& f : frames)
    if (f.model.kind == SensorModel::Kind::Vision) f = corrupt_depth(f, noise);
}

// Cache key for a rendered sequence: only the fields that reach the renderer.
// Modality and noise are applied downstream, so sweeps over them share one
// render.
std::string sequence_key(const ExperimentConfig& cfg,
                         const Pose* camera_override) {
  ExperimentConfig scene;
  scene.object = cfg.object;
  scene.trajectory = cfg.trajectory;
  scene.rig = cfg.rig;
  scene.rig.modality = Modality::VisuoTactile;
  scene.duration_s = cfg.duration_s;
  scene.playback_rate_hz = cfg.playback_rate_hz;
  std::string key = config_to_json_text(scene);
  if (camera_override) {
    const Quat& q = camera_override->q;
    const Vec3& t = camera_override->t;
    for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()})
      key += ' ' + csv_num(v);
  }
  return key;
}

// Returns the sequence for cfg: playback when sequence_dir is set, otherwise
// a (possibly cached) render. `scratch` keeps the uncached result alive.
const std::vector<SequenceStep>& obtain_sequence(
    const ExperimentConfig& cfg, const Pose* camera_override,
    SequenceCache* cache, std::vector<SequenceStep>& scratch,
    StageTimings& tm) {
  const bool playback = !cfg.sequence_dir.empty();
  const std::string key = playback ? "dir:" + cfg.sequence_dir
                                   : sequence_key(cfg, camera_override);
  if (cache) {
    auto it = cache->entries.find(key);
    if (it != cache->entries.end()) return it->second;
  }
  std::vector<SequenceStep> steps;
  if (playback) {
    StageTimer t(tm.io);
    steps = playback_sequence(cfg.sequence_dir);
  } else {
    StageTimer t(tm.render);
    steps = simulate_sequence(cfg, camera_override);
  }
  require(!steps.empty(), "run: empty sequence");
  if (cache) return cache->entries.emplace(key, std::move(steps)).first->second;
  scratch = std::move(steps);
  return scratch;
}

TrajectoryParams trajectory_params(const ExperimentConfig& cfg) {
  TrajectoryParams tp;
  tp.kind = cfg.trajectory.kind == "wobble-rotation"
                ? TrajectoryParams::Kind::WobbleRotation
                : TrajectoryParams::Kind::AxisRotation;
  tp.axis = cfg.trajectory.axis;
  tp.rate_deg_s = cfg.trajectory.rate_deg_s;
  tp.center = cfg.trajectory.center;
  tp.tilt_deg = cfg.trajectory.tilt_deg;
  tp.tilt_hz = cfg.trajectory.tilt_hz;
  tp.trans_amp_m = cfg.trajectory.trans_amp_m;
  tp.trans_hz = cfg.trajectory.trans_hz;
  tp.anchors = cfg.rig.anchors(cfg.trajectory.center);
  return tp;
}

int anchor_index(const std::string& sensor_id) {
  // scripted_trajectory names tactile sensors "tac{k}" after their anchor
  return std::stoi(sensor_id.substr(3));
}

struct LoopResult {
  std::vector<StepLog> steps;
  int lost = 0;
};

// Shared known-shape loop: filter to the modality, corrupt, solve. Steps
// where every sensor missed (tactile-only with no contacts) coast on the
// motion model and are logged as lost.
LoopResult track_sequence(const ExperimentConfig& cfg, uint64_t seed,
                          const std::vector<SequenceStep>& steps,
                          const DistanceField& field, Modality modality,
                          StageTimings& tm) {
  TrackerConfig tc = cfg.tracker;
  tc.weights = cfg.weights;
  tc.seed = substream(seed, "tracker");
  NoiseConfig noise = cfg.noise;
  noise.seed = substream(seed, "noise");

  PoseTracker tracker(tc, steps.front().object_pose);
  LoopResult out;
  out.steps.reserve(steps.size());
  for (const SequenceStep& s : steps) {
    std::vector<SensorFrame> frames = filter_modality(s.frames, modality);
    {
      StageTimer t(tm.corrupt);
      corrupt_vision(frames, noise);
    }
    StepLog log;
    log.stamp = s.stamp;
    log.gt = s.object_pose;
    for (const SensorFrame& f : frames)
      (f.model.kind == SensorModel::Kind::Tactile ? log.tactile_frames
                                                  : log.vision_frames)++;
    if (frames.empty()) {
      log.lost = true;
      log.est = tracker.predict_next();
    } else {
      StageTimer t(tm.track);
      const TrackStepDiag d = tracker.step(s.stamp, frames, field);
      log.est = d.pose;
      log.lost = d.lost;
      log.singular = d.singular;
      log.mean_sdf_residual = d.mean_sdf_residual;
      log.lm_iterations = d.lm_iterations;
      log.sdf_rows = d.sdf_rows;
      log.icp_rows = d.icp_rows;
      log.reg_rows = d.reg_rows;
    }
    out.lost += log.lost;
    out.steps.push_back(std::move(log));
  }
  return out;
}

DriftReport drift_for(const std::vector<StepLog>& steps,
                      const TriangleMesh& gt_mesh, const ExperimentConfig& cfg,
                      uint64_t seed) {
  MetricsConfig mc = cfg.metrics;
  mc.seed = substream(seed, "metrics");
  std::vector<TimedPose> est, gt;
  est.reserve(steps.size());
  gt.reserve(steps.size());
  for (const StepLog& s : steps) {
    est.push_back({s.stamp, s.est});
    gt.push_back({s.stamp, s.gt});
  }
  return drift_report(est, gt, gt_mesh, mc);
}

// Valid masked pixels of one frame, strided down to `cap` points and moved
// into the object frame of the pose estimate at capture time.
void accumulate_cloud(const SensorFrame& f, const Pose& est_object_pose,
                      int cap, std::vector<Vec3>& out) {
  std::vector<int32_t> px;
  const int n = f.model.width * f.model.height;
  px.reserve(size_t(n) / 4);
  for (int i = 0; i < n; ++i)
    if (f.mask.data[i] && std::isfinite(f.depth.data[i])) px.push_back(i);
  if (px.empty()) return;
  const int stride = std::max<int>(1, int((px.size() + cap - 1) / size_t(cap)));
  const Pose to_object = est_object_pose.inverse() * f.pose_world;
  for (size_t j = 0; j < px.size(); j += size_t(stride)) {
    const int x = px[j] % f.model.width, y = px[j] / f.model.width;
    out.push_back(to_object *
                  backproject(f.model, x, y, double(f.depth.data[px[j]])));
  }
}

std::vector<double> tau_ladder(double tau) {
  return {tau / 5.0, tau / 2.0, tau, 2.0 * tau};
}

// F-score sweep + coverage for a finished mesh; no-op on an empty mesh.
void score_mesh(RunResult& run, const TriangleMesh& gt_mesh,
                const std::vector<Vec3>& vision_cloud,
                const std::vector<Vec3>& touch_cloud,
                const ExperimentConfig& cfg, uint64_t seed) {
  if (run.final_mesh.empty()) return;
  run.recon.tau_sweep = tau_ladder(cfg.metrics.tau);
  run.recon.fscore_sweep =
      fscore_curve(gt_mesh, run.final_mesh, run.recon.tau_sweep,
                   cfg.metrics.samples, substream(seed, "metrics"));
  run.recon.final_fscore = run.recon.fscore_sweep[2];
  run.recon.coverage = coverage_labels(run.final_mesh, vision_cloud,
                                       touch_cloud, cfg.metrics.tau);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  return f;
}

void finish_out(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw IoError("write failed: " + path);
}

void write_pose_cols(std::string& row, const Pose& p) {
  for (double v : {p.q.w(), p.q.x(), p.q.y(), p.q.z(), p.t.x(), p.t.y(),
                   p.t.z()})
    row += ',' + csv_num(v);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<TimedPose> RunResult::est_trajectory() const {
  std::vector<TimedPose> out;
  out.reserve(steps.size());
  for (const StepLog& s : steps) out.push_back({s.stamp, s.est});
  return out;
}

std::vector<TimedPose> RunResult::gt_trajectory() const {
  std::vector<TimedPose> out;
  out.reserve(steps.size());
  for (const StepLog& s : steps) out.push_back({s.stamp, s.gt});
  return out;
}

std::vector<SequenceStep> simulate_sequence(const ExperimentConfig& cfg,
                                            const Pose* camera_override) {
  cfg.object.validate();
  cfg.trajectory.validate();
  cfg.rig.validate();
  const GroundTruthShape shape = cfg.object.make();
  const TrajectoryParams tp = trajectory_params(cfg);
  const std::vector<TrajectoryStep> traj =
      scripted_trajectory(shape, tp, cfg.duration_s, cfg.playback_rate_hz);

  const SensorModel cam = cfg.rig.vision_model();
  const Pose cam_pose = camera_override
                            ? *camera_override
                            : make_lookat_pose(cfg.rig.cam_eye,
                                               cfg.rig.cam_target);

  std::vector<SequenceStep> steps;
  steps.reserve(traj.size());
  for (const TrajectoryStep& ts : traj) {
    OccluderSet occ;
    for (const CapsuleSpec& c : cfg.rig.extra_occluders)
      occ.capsules.push_back(GroundTruthShape::capsule(c.a, c.b, c.radius));
    if (cfg.rig.finger_occluders)
      for (const auto& [id, pose] : ts.tactile_poses)
        occ.capsules.push_back(GroundTruthShape::capsule(
            pose.t, tp.anchors[size_t(anchor_index(id))],
            cfg.rig.finger_radius_m));

    SequenceStep out;
    out.stamp = ts.stamp;
    out.object_pose = ts.object_pose;
    out.frames.push_back(
        render_frame(shape, ts.object_pose, occ, cam, cam_pose, ts.stamp));
    for (const auto& [id, pose] : ts.tactile_poses)
      out.frames.push_back(render_frame(shape, ts.object_pose, occ,
                                        cfg.rig.tactile_model(id), pose,
                                        ts.stamp));
    steps.push_back(std::move(out));
  }
  snap_to_container(steps);
  return steps;
}

KnownField obtain_known_field(const ExperimentConfig& cfg) {
  KnownField out;
  if (cfg.bake.analytic) {
    out.field = std::make_shared<AnalyticDistanceField>(cfg.object.make());
    return out;
  }
  std::shared_ptr<FieldParams> params;
  if (!cfg.bake.field_path.empty() && fs::exists(cfg.bake.field_path)) {
    params = std::make_shared<FieldParams>(load_field(cfg.bake.field_path));
  } else {
    BakeOptions opts;
    opts.batch_size = cfg.bake.batch_size;
    opts.max_steps = cfg.bake.max_steps;
    opts.target_mae = cfg.bake.target_mae_m;
    opts.lr = cfg.bake.lr;
    opts.seed = cfg.bake.seed;
    BakeResult baked = bake_field_from_shape(cfg.field, cfg.object.make(), opts);
    params = std::make_shared<FieldParams>(std::move(baked.params));
    if (!cfg.bake.field_path.empty()) save_field(*params, cfg.bake.field_path);
  }
  out.params = params;
  out.field = std::make_shared<NeuralDistanceField>(params.get());
  return out;
}

RunResult run_tracking(const ExperimentConfig& cfg, uint64_t seed,
                       SequenceCache* cache) {
  cfg.validate();
  RunResult run;
  const auto t0 = Clock::now();
  std::vector<SequenceStep> scratch;
  const std::vector<SequenceStep>& steps =
      obtain_sequence(cfg, nullptr, cache, scratch, run.timings);
  KnownField known;
  {
    StageTimer t(run.timings.map);
    known = obtain_known_field(cfg);
  }
  LoopResult loop = track_sequence(cfg, seed, steps, *known.field,
                                   cfg.rig.modality, run.timings);
  run.steps = std::move(loop.steps);
  run.lost_steps = loop.lost;
  {
    StageTimer t(run.timings.eval);
    run.recon.drift = drift_for(run.steps, cfg.object.reference_mesh(), cfg,
                                seed);
  }
  run.timings.total = seconds_since(t0);
  return run;
}

RunResult run_slam(const ExperimentConfig& cfg, uint64_t seed,
                   SequenceCache* cache) {
  cfg.validate();
  RunResult run;
  const auto t0 = Clock::now();
  std::vector<SequenceStep> scratch;
  const std::vector<SequenceStep>& steps =
      obtain_sequence(cfg, nullptr, cache, scratch, run.timings);

  TrackerConfig tc = cfg.tracker;
  tc.weights = cfg.weights;
  tc.seed = substream(seed, "tracker");
  NoiseConfig noise = cfg.noise;
  noise.seed = substream(seed, "noise");
  MapperConfig mc;
  mc.sampling.d_tr = cfg.field.truncation;
  mc.weights = cfg.weights;
  mc.replay_size = cfg.mapper.replay_size;
  mc.bootstrap_iters = cfg.mapper.bootstrap_iters;
  mc.seed = substream(seed, "mapper");
  ShapeMapper mapper(cfg.field, mc);
  mapper.bank().d_thresh = cfg.mapper.keyframe_thresh_m;
  mapper.bank().t_max = cfg.mapper.forced_interval_s;
  mapper.bank().replay_batch_per_sensor = cfg.mapper.replay_batch_per_sensor;
  PoseTracker tracker(tc, steps.front().object_pose);

  std::vector<Vec3> vision_cloud, touch_cloud;
  double next_checkpoint = cfg.extract.checkpoint_period_s;
  const double cp_eps = 1e-9;

  for (size_t i = 0; i < steps.size(); ++i) {
    const SequenceStep& s = steps[i];
    std::vector<SensorFrame> frames = filter_modality(s.frames,
                                                      cfg.rig.modality);
    {
      StageTimer t(run.timings.corrupt);
      corrupt_vision(frames, noise);
    }
    StepLog log;
    log.stamp = s.stamp;
    log.gt = s.object_pose;
    for (const SensorFrame& f : frames)
      (f.model.kind == SensorModel::Kind::Tactile ? log.tactile_frames
                                                  : log.vision_frames)++;

    if (frames.empty()) {
      log.lost = true;
      log.est = tracker.predict_next();
    } else {
      int iters_left = cfg.mapper.shape_iters_per_step;
      if (i == 0) {
        // Bootstrap the field on the given initial pose before the first
        // solve; tracking against the untrained plateau would only drift.
        StageTimer t(run.timings.map);
        const KeyframeDecision d = mapper.consider(frames, s.object_pose);
        mapper.insert(frames, s.object_pose, d);
        mapper.iterate();
        iters_left--;
      }
      {
        StageTimer t(run.timings.track);
        const TrackStepDiag d = tracker.step(s.stamp, frames, mapper.field());
        log.est = d.pose;
        log.lost = d.lost;
        log.singular = d.singular;
        log.mean_sdf_residual = d.mean_sdf_residual;
        log.lm_iterations = d.lm_iterations;
        log.sdf_rows = d.sdf_rows;
        log.icp_rows = d.icp_rows;
        log.reg_rows = d.reg_rows;
      }
      {
        StageTimer t(run.timings.map);
        if (i > 0) {
          const KeyframeDecision d = mapper.consider(frames, log.est);
          if (d.accept) mapper.insert(frames, log.est, d);
        }
        for (int k = 0; k < iters_left; ++k) mapper.iterate();
        // second half of the alternation: solved window poses refresh the
        // keyframes they produced
        for (const WindowFrame& w : tracker.window().entries)
          mapper.update_keyframe_pose(w.stamp, w.pose);
      }
      {
        StageTimer t(run.timings.eval);
        for (const SensorFrame& f : frames) {
          const bool tactile = f.model.kind == SensorModel::Kind::Tactile;
          accumulate_cloud(f, log.est, tactile ? 200 : 400,
                           tactile ? touch_cloud : vision_cloud);
        }
      }
    }
    log.keyframes = int(mapper.bank().keyframes.size());
    log.shape_iters = mapper.iteration_count();
    run.lost_steps += log.lost;
    run.steps.push_back(std::move(log));

    if (s.stamp + cp_eps >= next_checkpoint) {
      StageTimer t(run.timings.extract);
      TriangleMesh mesh;
      try {
        mesh = extract_mesh(mapper.field(), cfg.field.bound_center,
                            cfg.field.bound_side,
                            cfg.extract.config(cfg.extract.checkpoint_resolution));
      } catch (const EmptySurface&) {
      }
      run.checkpoints.emplace_back(s.stamp, std::move(mesh));
      while (next_checkpoint <= s.stamp + cp_eps)
        next_checkpoint += cfg.extract.checkpoint_period_s;
    }
  }

  {
    StageTimer t(run.timings.extract);
    try {
      run.final_mesh = largest_component(
          extract_mesh(mapper.field(), cfg.field.bound_center,
                       cfg.field.bound_side,
                       cfg.extract.config(cfg.extract.resolution)));
    } catch (const EmptySurface&) {
    }
  }
  {
    StageTimer t(run.timings.eval);
    const TriangleMesh gt_mesh = cfg.object.reference_mesh();
    run.recon.drift = drift_for(run.steps, gt_mesh, cfg, seed);
    score_mesh(run, gt_mesh, vision_cloud, touch_cloud, cfg, seed);
  }
  run.timings.total = seconds_since(t0);
  return run;
}

RunResult run_fit_static(const ExperimentConfig& cfg, uint64_t seed) {
  cfg.validate();
  RunResult run;
  const auto t0 = Clock::now();
  const GroundTruthShape shape = cfg.object.make();
  const Pose object_pose{Quat::Identity(), cfg.trajectory.center};

  // One vision view per sphere point plus the tactile contacts of a single
  // trajectory step, all static.
  std::vector<std::vector<SensorFrame>> views;
  {
    StageTimer t(run.timings.render);
    const SensorModel cam = cfg.rig.vision_model();
    const std::vector<Pose> ring = camera_sphere(
        cfg.fit.views, cfg.fit.view_radius_m, cfg.trajectory.center);
    for (size_t v = 0; v < ring.size(); ++v)
      views.push_back(
          {render_frame(shape, object_pose, {}, cam, ring[v], double(v))});
    if (cfg.rig.modality != Modality::VisionOnly && cfg.rig.tactile_count > 0) {
      TrajectoryParams tp = trajectory_params(cfg);
      tp.rate_deg_s = 0;
      const std::vector<TrajectoryStep> contact =
          scripted_trajectory(shape, tp, 1.0, 1.0);
      for (const auto& [id, pose] : contact.front().tactile_poses)
        views.front().push_back(render_frame(shape, object_pose, {},
                                             cfg.rig.tactile_model(id), pose,
                                             0.0));
    }
    for (auto& frames : views)
      for (SensorFrame& frame : frames) snap_to_container(frame);
  }

  NoiseConfig noise = cfg.noise;
  noise.seed = substream(seed, "noise");
  MapperConfig mc;
  mc.sampling.d_tr = cfg.field.truncation;
  mc.weights = cfg.weights;
  mc.replay_size = cfg.mapper.replay_size;
  mc.bootstrap_iters = cfg.mapper.bootstrap_iters;
  mc.seed = substream(seed, "mapper");
  ShapeMapper mapper(cfg.field, mc);
  mapper.bank().replay_batch_per_sensor = cfg.mapper.replay_batch_per_sensor;

  std::vector<Vec3> vision_cloud, touch_cloud;
  for (size_t v = 0; v < views.size(); ++v) {
    std::vector<SensorFrame> frames =
        filter_modality(views[v], cfg.rig.modality);
    {
      StageTimer t(run.timings.corrupt);
      corrupt_vision(frames, noise);
    }
    if (frames.empty()) continue;
    {
      StageTimer t(run.timings.map);
      KeyframeDecision d;  // every view carries new coverage: force accept
      d.accept = true;
      d.reason = v == 0 ? AcceptReason::First : AcceptReason::Forced;
      mapper.insert(frames, object_pose, d);
    }
    StageTimer t(run.timings.eval);
    for (const SensorFrame& f : frames) {
      const bool tactile = f.model.kind == SensorModel::Kind::Tactile;
      accumulate_cloud(f, object_pose, tactile ? 200 : 400,
                       tactile ? touch_cloud : vision_cloud);
    }
  }
  require(!mapper.bank().empty(), "fit: no usable views");
  {
    StageTimer t(run.timings.map);
    for (int i = 0; i < cfg.fit.iterations; ++i) mapper.iterate();
  }
  {
    StageTimer t(run.timings.extract);
    try {
      run.final_mesh = largest_component(
          extract_mesh(mapper.field(), cfg.field.bound_center,
                       cfg.field.bound_side,
                       cfg.extract.config(cfg.extract.resolution)));
    } catch (const EmptySurface&) {
    }
  }
  {
    StageTimer t(run.timings.eval);
    score_mesh(run, cfg.object.reference_mesh(), vision_cloud, touch_cloud,
               cfg, seed);
  }
  run.timings.total = seconds_since(t0);
  return run;
}

OcclusionTable run_ablate_occlusion(const ExperimentConfig& cfg, uint64_t seed,
                                    SequenceCache* cache) {
  cfg.validate();
  require(cfg.sequence_dir.empty(),
          "occlusion ablation renders its own viewpoints; sequence_dir must "
          "be empty");
  StageTimings tm;
  KnownField known;
  {
    StageTimer t(tm.map);
    known = obtain_known_field(cfg);
  }
  const TriangleMesh gt_mesh = cfg.object.reference_mesh();
  const std::vector<Pose> viewpoints = camera_sphere(
      cfg.occlusion.viewpoints, cfg.occlusion.radius_m, cfg.trajectory.center);

  OcclusionTable table;
  std::vector<double> areas;
  for (size_t v = 0; v < viewpoints.size(); ++v) {
    std::vector<SequenceStep> scratch;
    const std::vector<SequenceStep>& steps =
        obtain_sequence(cfg, &viewpoints[v], cache, scratch, tm);

    double area = 0;
    int n = 0;
    for (const SequenceStep& s : steps)
      for (const SensorFrame& f : s.frames)
        if (f.model.kind == SensorModel::Kind::Vision) {
          for (uint8_t m : f.mask.data) area += m ? 1 : 0;
          ++n;
        }
    areas.push_back(n > 0 ? area / n : 0.0);

    OcclusionRow row;
    row.viewpoint = int(v);
    row.cam_position = viewpoints[v].t;
    LoopResult vision = track_sequence(cfg, seed, steps, *known.field,
                                       Modality::VisionOnly, tm);
    LoopResult fused = track_sequence(cfg, seed, steps, *known.field,
                                      Modality::VisuoTactile, tm);
    row.add_s_vision_only = drift_for(vision.steps, gt_mesh, cfg, seed).mean;
    row.add_s_visuo_tactile = drift_for(fused.steps, gt_mesh, cfg, seed).mean;
    row.lost_vision_only = vision.lost;
    row.lost_visuo_tactile = fused.lost;
    row.improvement_pct =
        row.add_s_vision_only > 0
            ? 100.0 * (row.add_s_vision_only - row.add_s_visuo_tactile) /
                  row.add_s_vision_only
            : 0.0;
    table.rows.push_back(row);
  }

  const std::vector<double> scores = occlusion_score_from_areas(areas);
  double sum = 0;
  for (size_t v = 0; v < table.rows.size(); ++v) {
    table.rows[v].score = scores[v];
    sum += table.rows[v].improvement_pct;
  }
  if (!table.rows.empty()) table.mean_improvement_pct = sum / table.rows.size();
  return table;
}

NoiseTable run_ablate_noise(const ExperimentConfig& cfg, uint64_t seed,
                            SequenceCache* cache) {
  cfg.validate();
  StageTimings tm;
  KnownField known;
  {
    StageTimer t(tm.map);
    known = obtain_known_field(cfg);
  }
  const TriangleMesh gt_mesh = cfg.object.reference_mesh();
  std::vector<SequenceStep> scratch;
  const std::vector<SequenceStep>& steps =
      obtain_sequence(cfg, nullptr, cache, scratch, tm);

  NoiseTable table;
  for (double d : cfg.noise_sweep.factors) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.noise.factor_D = d;
    for (Modality m : cfg.noise_sweep.modalities) {
      LoopResult loop = track_sequence(run_cfg, seed, steps, *known.field, m,
                                       tm);
      const DriftReport drift = drift_for(loop.steps, gt_mesh, cfg, seed);
      NoiseRow row;
      row.factor_d = d;
      row.modality = m;
      row.mean_add_s = drift.mean;
      for (double a : drift.add_s) row.max_add_s = std::max(row.max_add_s, a);
      row.lost_steps = loop.lost;
      row.failed = drift.failed;
      table.rows.push_back(row);
    }
  }
  return table;
}

// --- report emission ---------------------------------------------------------

void write_trajectory_csv(const std::string& path,
                          const std::vector<StepLog>& steps) {
  std::ofstream f = open_out(path);
  f << "step,stamp_s,est_qw,est_qx,est_qy,est_qz,est_tx_m,est_ty_m,est_tz_m,"
       "gt_qw,gt_qx,gt_qy,gt_qz,gt_tx_m,gt_ty_m,gt_tz_m,lost,singular,"
       "mean_sdf_residual_m,lm_iterations,sdf_rows,icp_rows,reg_rows,"
       "vision_frames,tactile_frames,keyframes,shape_iters\n";
  for (size_t i = 0; i < steps.size(); ++i) {
    const StepLog& s = steps[i];
    std::string row = std::to_string(i) + ',' + csv_num(s.stamp);
    write_pose_cols(row, s.est);
    write_pose_cols(row, s.gt);
    row += ',' + std::to_string(int(s.lost)) + ',' +
           std::to_string(int(s.singular)) + ',' +
           csv_num(s.mean_sdf_residual) + ',' +
           std::to_string(s.lm_iterations) + ',' + std::to_string(s.sdf_rows) +
           ',' + std::to_string(s.icp_rows) + ',' + std::to_string(s.reg_rows) +
           ',' + std::to_string(s.vision_frames) + ',' +
           std::to_string(s.tactile_frames) + ',' +
           std::to_string(s.keyframes) + ',' + std::to_string(s.shape_iters);
    f << row << '\n';
  }
  finish_out(f, path);
}

std::vector<TimedPose> read_trajectory_csv(const std::string& path,
                                           bool estimated) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": missing header");
  const std::vector<std::string> header = split_csv(line);
  const std::string prefix = estimated ? "est_" : "gt_";
  auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    throw IoError(path + ": missing column " + name);
  };
  const int c_stamp = col("stamp_s");
  const int c_qw = col(prefix + "qw"), c_qx = col(prefix + "qx"),
            c_qy = col(prefix + "qy"), c_qz = col(prefix + "qz");
  const int c_tx = col(estimated ? "est_tx_m" : "gt_tx_m"),
            c_ty = col(estimated ? "est_ty_m" : "gt_ty_m"),
            c_tz = col(estimated ? "est_tz_m" : "gt_tz_m");

  std::vector<TimedPose> out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    auto num = [&](int c) {
      if (c >= int(cells.size()))
        throw IoError(path + ": short row at line " + std::to_string(lineno));
      return std::stod(cells[size_t(c)]);
    };
    TimedPose tp;
    tp.stamp = num(c_stamp);
    tp.pose.q = Quat(num(c_qw), num(c_qx), num(c_qy), num(c_qz));
    tp.pose.t = Vec3(num(c_tx), num(c_ty), num(c_tz));
    out.push_back(tp);
  }
  return out;
}

void write_drift_csv(const std::string& path, const DriftReport& drift) {
  std::ofstream f = open_out(path);
  f << "stamp_s,add_s_m\n";
  for (size_t i = 0; i < drift.add_s.size(); ++i)
    f << csv_num(drift.stamps[i]) << ',' << csv_num(drift.add_s[i]) << '\n';
  finish_out(f, path);
}

void write_fscore_csv(const std::string& path, const std::vector<double>& taus,
                      const std::vector<FScore>& scores) {
  if (taus.size() != scores.size())
    throw InvalidParams("fscore csv: taus and scores differ in length");
  std::ofstream f = open_out(path);
  f << "tau_m,precision,recall,f\n";
  for (size_t i = 0; i < taus.size(); ++i)
    f << csv_num(taus[i]) << ',' << csv_num(scores[i].precision) << ','
      << csv_num(scores[i].recall) << ',' << csv_num(scores[i].f) << '\n';
  finish_out(f, path);
}

void write_coverage_csv(const std::string& path,
                        const std::vector<CoverageLabel>& labels) {
  size_t counts[3] = {0, 0, 0};
  for (CoverageLabel l : labels) counts[size_t(l)]++;
  const double n = labels.empty() ? 1.0 : double(labels.size());
  static const char* names[3] = {"vision", "touch", "hallucinated"};
  std::ofstream f = open_out(path);
  f << "label,vertices,fraction\n";
  for (int i = 0; i < 3; ++i)
    f << names[i] << ',' << counts[i] << ',' << csv_num(double(counts[i]) / n)
      << '\n';
  finish_out(f, path);
}

void write_timings_csv(const std::string& path, const StageTimings& t) {
  std::ofstream f = open_out(path);
  f << "stage,seconds\n";
  f << "render," << csv_num(t.render) << '\n';
  f << "corrupt," << csv_num(t.corrupt) << '\n';
  f << "track," << csv_num(t.track) << '\n';
  f << "map," << csv_num(t.map) << '\n';
  f << "extract," << csv_num(t.extract) << '\n';
  f << "eval," << csv_num(t.eval) << '\n';
  f << "io," << csv_num(t.io) << '\n';
  f << "stage_sum," << csv_num(t.stage_sum()) << '\n';
  f << "total," << csv_num(t.total) << '\n';
  finish_out(f, path);
}

void write_occlusion_csv(const std::string& path, const OcclusionTable& table) {
  std::ofstream f = open_out(path);
  f << "viewpoint,cam_x_m,cam_y_m,cam_z_m,occlusion_score,add_s_vision_only_m,"
       "add_s_visuo_tactile_m,improvement_pct,lost_vision_only,"
       "lost_visuo_tactile\n";
  for (const OcclusionRow& r : table.rows)
    f << r.viewpoint << ',' << csv_num(r.cam_position.x()) << ','
      << csv_num(r.cam_position.y()) << ',' << csv_num(r.cam_position.z())
      << ',' << csv_num(r.score) << ',' << csv_num(r.add_s_vision_only) << ','
      << csv_num(r.add_s_visuo_tactile) << ',' << csv_num(r.improvement_pct)
      << ',' << r.lost_vision_only << ',' << r.lost_visuo_tactile << '\n';
  finish_out(f, path);
}

void write_noise_csv(const std::string& path, const NoiseTable& table) {
  std::ofstream f = open_out(path);
  f << "factor_d,modality,mean_add_s_m,max_add_s_m,lost_steps,failed\n";
  for (const NoiseRow& r : table.rows)
    f << csv_num(r.factor_d) << ',' << to_string(r.modality) << ','
      << csv_num(r.mean_add_s) << ',' << csv_num(r.max_add_s) << ','
      << r.lost_steps << ',' << int(r.failed) << '\n';
  finish_out(f, path);
}

void write_run_outputs(const std::string& dir, const ExperimentConfig& cfg,
                       uint64_t seed, const RunResult& run) {
  fs::create_directories(dir);
  save_config(cfg, dir + "/config.json");
  write_trajectory_csv(dir + "/trajectory.csv", run.steps);
  write_drift_csv(dir + "/drift.csv", run.recon.drift);
  if (!run.recon.tau_sweep.empty())
    write_fscore_csv(dir + "/fscore.csv", run.recon.tau_sweep,
                     run.recon.fscore_sweep);
  if (!run.recon.coverage.empty())
    write_coverage_csv(dir + "/coverage.csv", run.recon.coverage);

  {  // summary.csv holds no wall clock, so reruns are byte-identical
    std::ofstream f = open_out(dir + "/summary.csv");
    f << "key,value\n";
    f << "name," << cfg.name << '\n';
    f << "mode," << to_string(cfg.mode) << '\n';
    f << "modality," << to_string(cfg.rig.modality) << '\n';
    f << "seed," << seed << '\n';
    f << "steps," << run.steps.size() << '\n';
    f << "lost_steps," << run.lost_steps << '\n';
    f << "drift_samples," << run.recon.drift.add_s.size() << '\n';
    f << "drift_mean_m," << csv_num(run.recon.drift.mean) << '\n';
    f << "drift_failed," << int(run.recon.drift.failed) << '\n';
    f << "fscore_tau_m," << csv_num(cfg.metrics.tau) << '\n';
    f << "fscore_precision," << csv_num(run.recon.final_fscore.precision)
      << '\n';
    f << "fscore_recall," << csv_num(run.recon.final_fscore.recall) << '\n';
    f << "fscore," << csv_num(run.recon.final_fscore.f) << '\n';
    f << "mesh_vertices," << run.final_mesh.vertices.size() << '\n';
    f << "mesh_faces," << run.final_mesh.faces.size() << '\n';
    if (!run.steps.empty()) {
      f << "keyframes," << run.steps.back().keyframes << '\n';
      f << "shape_iters," << run.steps.back().shape_iters << '\n';
    }
    finish_out(f, dir + "/summary.csv");
  }
  write_timings_csv(dir + "/timings.csv", run.timings);

  if (!run.final_mesh.empty()) save_ply(run.final_mesh, dir + "/mesh_final.ply");
  {
    std::ofstream f = open_out(dir + "/checkpoints.csv");
    f << "index,stamp_s,file,vertices,faces\n";
    for (size_t i = 0; i < run.checkpoints.size(); ++i) {
      const auto& [stamp, mesh] = run.checkpoints[i];
      char name[48];
      std::snprintf(name, sizeof(name), "mesh_checkpoint_%02zu.ply", i);
      if (!mesh.empty()) save_ply(mesh, dir + "/" + name);
      f << i << ',' << csv_num(stamp) << ',' << (mesh.empty() ? "" : name)
        << ',' << mesh.vertices.size() << ',' << mesh.faces.size() << '\n';
    }
    finish_out(f, dir + "/checkpoints.csv");
  }
}

}  // namespace vtsdf
