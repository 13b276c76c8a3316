#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtsdf/adam.hpp"
#include "vtsdf/neural_field.hpp"
#include "vtsdf/rng.hpp"
#include "vtsdf/sensor_sim.hpp"

namespace vtsdf {

// --- keyframe bank ----------------------------------------------------------

enum class AcceptReason { First, InfoGain, Forced };

struct Keyframe {
  std::vector<SensorFrame> frames;  // one per sensor at this stamp
  double stamp = 0.0;
  Pose object_pose;  // tracked pose at capture; refined by the tracker later
  double avg_render_loss = 0.0;
  AcceptReason accept_reason = AcceptReason::First;

  // seeded candidate pixel pools per frame (linear indices), built on insert
  struct PixelPools {
    std::vector<int32_t> surface;  // mask-true with valid depth
    std::vector<int32_t> free;     // mask-false with valid scene depth
  };
  std::vector<PixelPools> pools;
};

struct KeyframeBank {
  double d_thresh = 0.01;           // render-loss acceptance threshold, m
  double t_max = 0.2;               // forced-accept interval, s
  int replay_batch_per_sensor = 10; // pixels per sensor per replayed keyframe
  std::vector<Keyframe> keyframes;

  bool empty() const { return keyframes.empty(); }
  double last_stamp() const {
    return keyframes.empty() ? -1e30 : keyframes.back().stamp;
  }
};

struct KeyframeDecision {
  bool accept = false;
  AcceptReason reason = AcceptReason::First;
  double render_loss = 0.0;
};

// Sphere-traced depth through a distance field for selected pixels; returns
// z-depth per pixel (NaN where the ray finds no surface). Used for the
// information-gain keyframe test and render diagnostics.
std::vector<double> render_field_depth(const DistanceField& field,
                                       const Pose& object_pose,
                                       const SensorModel& sensor,
                                       const Pose& sensor_pose,
                                       const std::vector<int32_t>& pixels,
                                       int max_steps = 96);

// Accept when the frozen field renders the candidate poorly (mean absolute
// depth error over up to `decision_pixels` mask pixels above d_thresh), when
// t_max elapsed since the last keyframe, or when the bank is empty. Rays the
// field cannot render contribute a 5 cm penalty.
KeyframeDecision keyframe_decision(const KeyframeBank& bank,
                                   const std::vector<SensorFrame>& candidate,
                                   const DistanceField& field,
                                   const Pose& object_pose, Rng& rng,
                                   int decision_pixels = 200);

// Build pixel pools and append; enforces strictly increasing stamps.
void bank_insert(KeyframeBank& bank, std::vector<SensorFrame> frames,
                 const Pose& object_pose, AcceptReason reason,
                 double initial_render_loss, Rng& rng,
                 int pool_cap_per_frame = 4000);

// Always the two most recent keyframes, plus (replay_size - 2) more drawn
// without replacement with probability proportional to avg_render_loss+1e-6.
// Returns indices into bank.keyframes, newest last.
std::vector<int> select_replay(const KeyframeBank& bank, Rng& rng,
                               int replay_size = 5);

// --- ray sampling -----------------------------------------------------------

struct SampleOptions {
  int n_strat = 8;        // stratified samples per ray
  int n_surf = 4;         // Gaussian samples around the measured surface
  double free_space_fraction_vision = 0.5;
  double d_tr = 0.005;    // truncation distance, m
};

// Samples live in the object frame (each keyframe's pose applied at build
// time) so one field evaluation covers the whole batch. Sets are split by
// the distance bound: |d̂| ≤ d_tr supervises F towards d̂, d̂ > d_tr towards
// the free-space plateau d_tr. Tactile rays contribute truncation samples
// only.
struct RaySampleBatch {
  std::vector<Vec3> points;        // object frame, all inside the field bound
  std::vector<double> dist_bound;  // d̂ per sample (euclidean along the ray)
  std::vector<int32_t> ray_index;
  std::vector<uint8_t> is_free;    // 1: free set, 0: truncation set
  std::vector<uint8_t> ray_is_tactile;  // per ray
  std::vector<int32_t> ray_keyframe;    // bank index the ray came from
  int ray_count = 0;
  double d_tr = 0.005;

  int size() const { return int(points.size()); }
};

// d̂ = measured depth − sample depth, both euclidean along the ray.
double distance_bound(double measured_ray_depth, double sample_ray_depth);

RaySampleBatch sample_rays(const KeyframeBank& bank,
                           const std::vector<int>& replay,
                           const FieldConfig& field_cfg, Rng& rng,
                           const SampleOptions& opts = {});

// --- truncated SDF loss -----------------------------------------------------

struct LossWeights {
  double w_tr = 10.0;
  double w_sdf = 0.01;
  double w_reg = 0.01;
  double w_icp = 1.0;
};

struct ShapeLoss {
  double free = 0.0;   // mean over rays of mean |F - d_tr| on free samples
  double trunc = 0.0;  // mean over rays of mean |F - d̂| on truncation samples
  double total = 0.0;  // free + w_tr * trunc
  int n_rays = 0;
  int n_samples = 0;
};

// Evaluates the loss and accumulates parameter gradients (L1 subgradient,
// zero at zero). per_ray_trunc_loss, when given, receives each ray's mean
// truncation error for keyframe bookkeeping.
ShapeLoss shape_loss(const FieldParams& params, const RaySampleBatch& batch,
                     FieldBatch& workspace, GradAccumulator& acc,
                     double w_tr = 10.0,
                     std::vector<double>* per_ray_trunc_loss = nullptr);

// --- online mapper ----------------------------------------------------------

struct MapperConfig {
  SampleOptions sampling;
  LossWeights weights;
  int replay_size = 5;
  int bootstrap_iters = 500;  // iterations on the first keyframe alone
  int decision_pixels = 200;
  double ema_alpha = 0.3;     // avg_render_loss refresh rate
  uint64_t seed = 0;
};

struct MapperDiag {
  int64_t iteration = 0;
  ShapeLoss loss;
  int keyframes = 0;
  bool bootstrapped = false;  // true when this call ran the bootstrap
};

// Owns the field parameters, optimizer state and keyframe bank for one run.
class ShapeMapper {
 public:
  ShapeMapper(const FieldConfig& field_cfg, const MapperConfig& cfg);

  // Decision + optional insertion for a new multi-sensor frame.
  KeyframeDecision consider(const std::vector<SensorFrame>& frames,
                            const Pose& object_pose);
  void insert(std::vector<SensorFrame> frames, const Pose& object_pose,
              const KeyframeDecision& decision);

  // One replay/sample/loss/step cycle; the first call additionally runs
  // bootstrap_iters iterations on the initial keyframe.
  MapperDiag iterate();

  // Tracker feedback: refresh the stored pose of the keyframe at `stamp`.
  void update_keyframe_pose(double stamp, const Pose& pose);

  const FieldParams& params() const { return params_; }
  FieldParams& params() { return params_; }
  const KeyframeBank& bank() const { return bank_; }
  KeyframeBank& bank() { return bank_; }
  const NeuralDistanceField& field() const { return field_view_; }
  int64_t iteration_count() const { return iteration_; }

 private:
  MapperDiag iterate_once(const std::vector<int>& replay, Rng& rng);

  MapperConfig cfg_;
  FieldParams params_;
  NeuralDistanceField field_view_;
  AdamState adam_;
  KeyframeBank bank_;
  FieldBatch batch_;
  GradAccumulator acc_;
  int64_t iteration_ = 0;
  bool bootstrapped_ = false;
};

}  // namespace vtsdf
