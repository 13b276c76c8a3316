#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtsdf/marching_cubes.hpp"
#include "vtsdf/metrics.hpp"
#include "vtsdf/neural_field.hpp"
#include "vtsdf/pose_tracker.hpp"
#include "vtsdf/sensor_sim.hpp"
#include "vtsdf/shape_mapper.hpp"

namespace vtsdf {

enum class RunMode { Slam, TrackKnown, AblateOcclusion, AblateNoise, FitStatic };
enum class Modality { VisuoTactile, VisionOnly, TactileOnly };

std::string to_string(RunMode m);
std::string to_string(Modality m);
RunMode run_mode_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);

// Scene object; sizes are full extents in meters, everything object-frame.
struct ObjectSpec {
  std::string kind = "box";  // sphere | box | rounded-box | capsule
  Vec3 size = Vec3(0.06, 0.06, 0.06);
  double radius = 0.03;
  Vec3 a = Vec3(0, 0, -0.02), b = Vec3(0, 0, 0.02);  // capsule axis

  GroundTruthShape make() const;
  // Exact mesh for box/sphere; extracted from the analytic field otherwise.
  TriangleMesh reference_mesh() const;
  void validate() const;
};

struct TrajectorySpec {
  std::string kind = "axis-rotation";  // axis-rotation | wobble-rotation
  Vec3 axis = Vec3(1, 1, 1);
  double rate_deg_s = 90;
  Vec3 center = Vec3::Zero();
  double tilt_deg = 0, tilt_hz = 0.2;
  double trans_amp_m = 0, trans_hz = 0.25;

  void validate() const;
};

struct CapsuleSpec {
  Vec3 a = Vec3::Zero(), b = Vec3::Zero();
  double radius = 0.01;
};

// Sensor rig: one vision camera plus tactile_count finger-mounted sensors
// whose anchors sit on a Fibonacci sphere of anchor_radius_m around the
// object. Finger occluders are capsules from each touching sensor back to
// its anchor.
struct RigSpec {
  Vec3 cam_eye = Vec3(0.25, 0.12, 0.18);
  Vec3 cam_target = Vec3::Zero();
  int tactile_count = 4;
  double anchor_radius_m = 0.09;
  int tactile_downscale = 1;  // divides the 240x320 gel resolution
  Modality modality = Modality::VisuoTactile;
  bool finger_occluders = false;
  double finger_radius_m = 0.012;
  std::vector<CapsuleSpec> extra_occluders;

  SensorModel vision_model() const;
  SensorModel tactile_model(const std::string& id) const;
  std::vector<Vec3> anchors(const Vec3& center) const;
  void validate() const;
};

// Mapper schedule and keyframe-bank knobs exposed to configs.
struct MapperSpec {
  int replay_size = 5;
  int bootstrap_iters = 500;
  int replay_batch_per_sensor = 10;
  double keyframe_thresh_m = 0.01;
  double forced_interval_s = 0.2;
  int shape_iters_per_step = 1;  // alternation: 2 pose solves then this

  void validate() const;
};

// Mesh extraction cadence and grids for checkpoints vs the final report.
struct ExtractSpec {
  int resolution = 200;
  int checkpoint_resolution = 96;
  double checkpoint_period_s = 5;
  int block = 4;
  double slope_margin = 1.5;

  ExtractConfig config(int res) const;
  void validate() const;
};

struct FitSpec {
  int views = 12;
  double view_radius_m = 0.3;
  int iterations = 2000;

  void validate() const;
};

// Source of the frozen field for known-shape modes: load field_path if it
// exists, otherwise bake from the object (and save to field_path when set).
// analytic = true substitutes the exact signed distance (test oracle).
struct BakeSpec {
  std::string field_path;
  bool analytic = false;
  int max_steps = 6000;
  int batch_size = 1024;
  double target_mae_m = 4e-4;
  double lr = 2e-3;
  uint64_t seed = 7;

  void validate() const;
};

struct OcclusionSpec {
  int viewpoints = 12;
  double radius_m = 0.5;

  void validate() const;
};

struct NoiseSweepSpec {
  std::vector<double> factors = {0, 10, 20, 30, 40, 50};
  std::vector<Modality> modalities = {Modality::VisionOnly,
                                      Modality::VisuoTactile};

  void validate() const;
};

// Complete description of one experiment; a run is a pure function of
// (config, seed). The embedded TrackerConfig's weights and seed are
// overwritten per run from `weights` and the run seed.
struct ExperimentConfig {
  std::string name = "run";
  RunMode mode = RunMode::Slam;
  ObjectSpec object;
  TrajectorySpec trajectory;
  RigSpec rig;
  NoiseConfig noise;
  LossWeights weights;
  FieldConfig field;
  MetricsConfig metrics;
  TrackerConfig tracker;
  MapperSpec mapper;
  ExtractSpec extract;
  FitSpec fit;
  BakeSpec bake;
  OcclusionSpec occlusion;
  NoiseSweepSpec noise_sweep;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  double duration_s = 30;
  double playback_rate_hz = 1;
  std::string sequence_dir;  // non-empty: play back instead of rendering

  void validate() const;
};

// JSON round trip; parsing rejects unknown keys, serialization echoes every
// field with exact doubles so identical configs give identical bytes.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Deterministic shortest-exact decimal for CSV / JSON emission.
std::string csv_num(double v);

}  // namespace vtsdf
