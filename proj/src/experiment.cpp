#include "vtsdf/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "vtsdf/errors.hpp"

namespace vtsdf {

using nlohmann::json;

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Slam: return "slam";
    case RunMode::TrackKnown: return "track-known";
    case RunMode::AblateOcclusion: return "ablate-occlusion";
    case RunMode::AblateNoise: return "ablate-noise";
    case RunMode::FitStatic: return "fit-static";
  }
  throw InvalidParams("to_string: bad RunMode");
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::VisuoTactile: return "visuo-tactile";
    case Modality::VisionOnly: return "vision-only";
    case Modality::TactileOnly: return "tactile-only";
  }
  throw InvalidParams("to_string: bad Modality");
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "slam") return RunMode::Slam;
  if (s == "track-known") return RunMode::TrackKnown;
  if (s == "ablate-occlusion") return RunMode::AblateOcclusion;
  if (s == "ablate-noise") return RunMode::AblateNoise;
  if (s == "fit-static") return RunMode::FitStatic;
  throw InvalidParams("config: unknown mode '" + s + "'");
}

Modality modality_from_string(const std::string& s) {
  if (s == "visuo-tactile") return Modality::VisuoTactile;
  if (s == "vision-only") return Modality::VisionOnly;
  if (s == "tactile-only") return Modality::TactileOnly;
  throw InvalidParams("config: unknown modality '" + s + "'");
}

// --- object -----------------------------------------------------------------

GroundTruthShape ObjectSpec::make() const {
  validate();
  if (kind == "sphere") return GroundTruthShape::sphere(radius);
  if (kind == "box") return GroundTruthShape::box(size);
  if (kind == "rounded-box") return GroundTruthShape::rounded_box(size, radius);
  return GroundTruthShape::capsule(a, b, radius);
}

TriangleMesh ObjectSpec::reference_mesh() const {
  validate();
  if (kind == "box") return make_box_mesh(size);
  if (kind == "sphere") return make_icosphere(radius, 4);
  ExtractConfig ec;
  ec.resolution = 200;
  return extract_mesh(AnalyticDistanceField(make()), Vec3::Zero(), 0.15, ec);
}

void ObjectSpec::validate() const {
  const std::set<std::string> kinds{"sphere", "box", "rounded-box", "capsule"};
  require(kinds.count(kind), "object: unknown kind '" + kind + "'");
  if (kind != "box") require(radius > 0, "object: radius must be positive");
  if (kind == "box" || kind == "rounded-box")
    require(size.minCoeff() > 0, "object: size must be positive");
}

// Largest distance from the object frame origin to the surface; used to
// check the object fits the field bound.
static double object_extent(const ObjectSpec& o) {
  if (o.kind == "sphere") return o.radius;
  if (o.kind == "box") return 0.5 * o.size.norm();
  if (o.kind == "rounded-box") return 0.5 * o.size.norm() + o.radius;
  return std::max(o.a.norm(), o.b.norm()) + o.radius;
}

// --- trajectory / rig -------------------------------------------------------

void TrajectorySpec::validate() const {
  require(kind == "axis-rotation" || kind == "wobble-rotation",
          "trajectory: unknown kind '" + kind + "'");
  require(axis.norm() > 1e-9, "trajectory: zero axis");
  require(tilt_deg >= 0 && tilt_deg <= 10, "trajectory: tilt in [0, 10] deg");
  require(trans_amp_m >= 0 && trans_amp_m <= 0.005,
          "trajectory: translation amplitude in [0, 5] mm");
}

SensorModel RigSpec::vision_model() const {
  return SensorModel::vision_default("cam0");
}

SensorModel RigSpec::tactile_model(const std::string& id) const {
  SensorModel m = SensorModel::tactile_default(id);
  m.width /= tactile_downscale;
  m.height /= tactile_downscale;
  m.fx /= tactile_downscale;
  m.fy /= tactile_downscale;
  m.cx = m.width / 2.0;
  m.cy = m.height / 2.0;
  return m;
}

std::vector<Vec3> RigSpec::anchors(const Vec3& center) const {
  std::vector<Vec3> out;
  if (tactile_count <= 0) return out;
  for (const Pose& p : camera_sphere(tactile_count, anchor_radius_m, center))
    out.push_back(p.t);
  return out;
}

void RigSpec::validate() const {
  require(tactile_count >= 0 && tactile_count <= 4,
          "rig: tactile_count in [0, 4]");
  require(anchor_radius_m > 0, "rig: anchor radius must be positive");
  require(tactile_downscale >= 1 && 240 % tactile_downscale == 0 &&
              320 % tactile_downscale == 0,
          "rig: tactile_downscale must divide 240x320");
  require((cam_eye - cam_target).norm() > 1e-6, "rig: camera at its target");
  require(finger_radius_m > 0, "rig: finger radius must be positive");
  for (const CapsuleSpec& c : extra_occluders)
    require(c.radius > 0, "rig: occluder radius must be positive");
  if (modality == Modality::TactileOnly)
    require(tactile_count > 0, "rig: tactile-only needs tactile sensors");
}

// --- remaining specs ---------------------------------------------------------

void MapperSpec::validate() const {
  require(replay_size >= 1, "mapper: replay_size must be >= 1");
  require(bootstrap_iters >= 0, "mapper: bootstrap_iters must be >= 0");
  require(replay_batch_per_sensor >= 1, "mapper: replay batch must be >= 1");
  require(keyframe_thresh_m > 0, "mapper: keyframe threshold must be positive");
  require(forced_interval_s > 0, "mapper: forced interval must be positive");
  require(shape_iters_per_step >= 0, "mapper: shape_iters_per_step >= 0");
}

ExtractConfig ExtractSpec::config(int res) const {
  ExtractConfig ec;
  ec.resolution = res;
  ec.block = block;
  ec.slope_margin = slope_margin;
  return ec;
}

void ExtractSpec::validate() const {
  config(resolution).validate();
  config(checkpoint_resolution).validate();
  require(checkpoint_period_s > 0, "extract: checkpoint period must be > 0");
}

void FitSpec::validate() const {
  require(views >= 1, "fit: views must be >= 1");
  require(view_radius_m > 0, "fit: view radius must be positive");
  require(iterations >= 1, "fit: iterations must be >= 1");
}

void BakeSpec::validate() const {
  require(max_steps >= 1, "bake: max_steps must be >= 1");
  require(batch_size >= 1, "bake: batch_size must be >= 1");
  require(target_mae_m > 0, "bake: target mae must be positive");
  require(lr > 0, "bake: learning rate must be positive");
}

void OcclusionSpec::validate() const {
  require(viewpoints >= 1, "occlusion: viewpoints must be >= 1");
  require(radius_m > 0, "occlusion: radius must be positive");
}

void NoiseSweepSpec::validate() const {
  require(!factors.empty(), "noise_sweep: empty factor list");
  for (double d : factors)
    require(d >= 0, "noise_sweep: factors must be >= 0");
  require(!modalities.empty(), "noise_sweep: empty modality list");
}

void ExperimentConfig::validate() const {
  object.validate();
  trajectory.validate();
  rig.validate();
  field.validate();
  metrics.validate();
  mapper.validate();
  extract.validate();
  fit.validate();
  bake.validate();
  occlusion.validate();
  noise_sweep.validate();
  require(noise.factor_D >= 0, "noise: factor_d must be >= 0");
  require(noise.quantization_step >= 0 && noise.shuffle_radius >= 0 &&
              noise.hf_sigma >= 0,
          "noise: constants must be >= 0");
  require(tracker.window >= 1 && tracker.lm_iters >= 1 &&
              tracker.solves_per_step >= 1 && tracker.sdf_rays_per_frame >= 1,
          "tracker: window, iterations and ray counts must be positive");
  require(!seeds.empty(), "config: empty seed list");
  require(duration_s > 0, "config: duration must be positive");
  require(playback_rate_hz > 0, "config: playback rate must be positive");
  require(object_extent(object) + trajectory.trans_amp_m <=
              0.5 * field.bound_side - field.truncation,
          "config: object does not fit the field bound");
}

// --- json --------------------------------------------------------------------

namespace {

// Strict reader: every key in the object must be consumed by a get() call.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object())
      throw InvalidParams("config: " + where_ + " must be an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw InvalidParams("config: unknown key '" + where_ + "." +
                            item.key() + "'");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (const json* v = find(key)) read(*v, key, out);
  }

 private:
  template <typename T>
  void read(const json& v, const char* key, T& out) {
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw InvalidParams("config: bad value for '" + where_ + "." + key + "'");
    }
  }

  void read(const json& v, const char* key, Vec3& out) {
    if (!v.is_array() || v.size() != 3)
      throw InvalidParams("config: '" + where_ + "." + key +
                          "' must be a 3-array");
    out = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }

  void read(const json& v, const char* key, RunMode& out) {
    out = run_mode_from_string(v.get<std::string>());
    (void)key;
  }

  void read(const json& v, const char* key, Modality& out) {
    out = modality_from_string(v.get<std::string>());
    (void)key;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json object_to_json(const ObjectSpec& o) {
  return json{{"kind", o.kind},       {"size", vec3_json(o.size)},
              {"radius", o.radius},   {"a", vec3_json(o.a)},
              {"b", vec3_json(o.b)}};
}

void object_from_json(const json& j, ObjectSpec& o) {
  Reader r(j, "object");
  r.get("kind", o.kind);
  r.get("size", o.size);
  r.get("radius", o.radius);
  r.get("a", o.a);
  r.get("b", o.b);
}

json trajectory_to_json(const TrajectorySpec& t) {
  return json{{"kind", t.kind},
              {"axis", vec3_json(t.axis)},
              {"rate_deg_s", t.rate_deg_s},
              {"center", vec3_json(t.center)},
              {"tilt_deg", t.tilt_deg},
              {"tilt_hz", t.tilt_hz},
              {"trans_amp_m", t.trans_amp_m},
              {"trans_hz", t.trans_hz}};
}

void trajectory_from_json(const json& j, TrajectorySpec& t) {
  Reader r(j, "trajectory");
  r.get("kind", t.kind);
  r.get("axis", t.axis);
  r.get("rate_deg_s", t.rate_deg_s);
  r.get("center", t.center);
  r.get("tilt_deg", t.tilt_deg);
  r.get("tilt_hz", t.tilt_hz);
  r.get("trans_amp_m", t.trans_amp_m);
  r.get("trans_hz", t.trans_hz);
}

json rig_to_json(const RigSpec& g) {
  json occ = json::array();
  for (const CapsuleSpec& c : g.extra_occluders)
    occ.push_back(json{
        {"a", vec3_json(c.a)}, {"b", vec3_json(c.b)}, {"radius", c.radius}});
  return json{{"cam_eye", vec3_json(g.cam_eye)},
              {"cam_target", vec3_json(g.cam_target)},
              {"tactile_count", g.tactile_count},
              {"anchor_radius_m", g.anchor_radius_m},
              {"tactile_downscale", g.tactile_downscale},
              {"modality", to_string(g.modality)},
              {"finger_occluders", g.finger_occluders},
              {"finger_radius_m", g.finger_radius_m},
              {"extra_occluders", occ}};
}

void rig_from_json(const json& j, RigSpec& g) {
  Reader r(j, "rig");
  r.get("cam_eye", g.cam_eye);
  r.get("cam_target", g.cam_target);
  r.get("tactile_count", g.tactile_count);
  r.get("anchor_radius_m", g.anchor_radius_m);
  r.get("tactile_downscale", g.tactile_downscale);
  r.get("modality", g.modality);
  r.get("finger_occluders", g.finger_occluders);
  r.get("finger_radius_m", g.finger_radius_m);
  if (const json* occ = r.find("extra_occluders")) {
    g.extra_occluders.clear();
    for (const json& cj : *occ) {
      CapsuleSpec c;
      Reader cr(cj, "rig.extra_occluders[]");
      cr.get("a", c.a);
      cr.get("b", c.b);
      cr.get("radius", c.radius);
      g.extra_occluders.push_back(c);
    }
  }
}

json modalities_json(const std::vector<Modality>& ms) {
  json out = json::array();
  for (Modality m : ms) out.push_back(to_string(m));
  return out;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidParams(std::string("config: parse error: ") + e.what());
  }

  ExperimentConfig c;
  Reader r(j, "config");
  r.get("name", c.name);
  r.get("mode", c.mode);
  if (const json* v = r.find("object")) object_from_json(*v, c.object);
  if (const json* v = r.find("trajectory")) trajectory_from_json(*v, c.trajectory);
  if (const json* v = r.find("rig")) rig_from_json(*v, c.rig);
  if (const json* v = r.find("noise")) {
    Reader n(*v, "noise");
    n.get("factor_d", c.noise.factor_D);
    n.get("quantization_step_m", c.noise.quantization_step);
    n.get("shuffle_radius_px", c.noise.shuffle_radius);
    n.get("hf_sigma_m", c.noise.hf_sigma);
  }
  if (const json* v = r.find("weights")) {
    Reader w(*v, "weights");
    w.get("w_tr", c.weights.w_tr);
    w.get("w_sdf", c.weights.w_sdf);
    w.get("w_reg", c.weights.w_reg);
    w.get("w_icp", c.weights.w_icp);
  }
  if (const json* v = r.find("field")) {
    Reader f(*v, "field");
    f.get("levels", c.field.levels);
    f.get("features_per_level", c.field.features_per_level);
    f.get("table_size", c.field.table_size);
    f.get("base_resolution", c.field.base_resolution);
    f.get("growth_factor", c.field.growth_factor);
    f.get("mlp_layers", c.field.mlp_layers);
    f.get("mlp_width", c.field.mlp_width);
    f.get("bound_side_m", c.field.bound_side);
    f.get("bound_center", c.field.bound_center);
    f.get("truncation_m", c.field.truncation);
  }
  if (const json* v = r.find("metrics")) {
    Reader m(*v, "metrics");
    m.get("tau_m", c.metrics.tau);
    m.get("samples", c.metrics.samples);
    m.get("failure_thresh_m", c.metrics.failure_thresh);
    m.get("grace_period_s", c.metrics.grace_period);
  }
  if (const json* v = r.find("tracker")) {
    Reader t(*v, "tracker");
    t.get("window", c.tracker.window);
    t.get("sdf_rays_per_frame", c.tracker.sdf_rays_per_frame);
    t.get("lm_iters", c.tracker.lm_iters);
    t.get("solves_per_step", c.tracker.solves_per_step);
    t.get("icp_max_points_vision", c.tracker.icp_max_points_vision);
    t.get("icp_max_points_tactile", c.tracker.icp_max_points_tactile);
    t.get("lost_mean_residual_m", c.tracker.lost_mean_residual);
  }
  if (const json* v = r.find("mapper")) {
    Reader m(*v, "mapper");
    m.get("replay_size", c.mapper.replay_size);
    m.get("bootstrap_iters", c.mapper.bootstrap_iters);
    m.get("replay_batch_per_sensor", c.mapper.replay_batch_per_sensor);
    m.get("keyframe_thresh_m", c.mapper.keyframe_thresh_m);
    m.get("forced_interval_s", c.mapper.forced_interval_s);
    m.get("shape_iters_per_step", c.mapper.shape_iters_per_step);
  }
  if (const json* v = r.find("extract")) {
    Reader e(*v, "extract");
    e.get("resolution", c.extract.resolution);
    e.get("checkpoint_resolution", c.extract.checkpoint_resolution);
    e.get("checkpoint_period_s", c.extract.checkpoint_period_s);
    e.get("block", c.extract.block);
    e.get("slope_margin", c.extract.slope_margin);
  }
  if (const json* v = r.find("fit")) {
    Reader f(*v, "fit");
    f.get("views", c.fit.views);
    f.get("view_radius_m", c.fit.view_radius_m);
    f.get("iterations", c.fit.iterations);
  }
  if (const json* v = r.find("bake")) {
    Reader b(*v, "bake");
    b.get("field_path", c.bake.field_path);
    b.get("analytic", c.bake.analytic);
    b.get("max_steps", c.bake.max_steps);
    b.get("batch_size", c.bake.batch_size);
    b.get("target_mae_m", c.bake.target_mae_m);
    b.get("lr", c.bake.lr);
    b.get("seed", c.bake.seed);
  }
  if (const json* v = r.find("occlusion")) {
    Reader o(*v, "occlusion");
    o.get("viewpoints", c.occlusion.viewpoints);
    o.get("radius_m", c.occlusion.radius_m);
  }
  if (const json* v = r.find("noise_sweep")) {
    Reader n(*v, "noise_sweep");
    n.get("factors", c.noise_sweep.factors);
    if (const json* ms = n.find("modalities")) {
      c.noise_sweep.modalities.clear();
      for (const json& s : *ms)
        c.noise_sweep.modalities.push_back(
            modality_from_string(s.get<std::string>()));
    }
  }
  r.get("seeds", c.seeds);
  r.get("duration_s", c.duration_s);
  r.get("playback_rate_hz", c.playback_rate_hz);
  r.get("sequence_dir", c.sequence_dir);

  c.validate();
  return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
  const json j{
      {"name", c.name},
      {"mode", to_string(c.mode)},
      {"object", object_to_json(c.object)},
      {"trajectory", trajectory_to_json(c.trajectory)},
      {"rig", rig_to_json(c.rig)},
      {"noise",
       {{"factor_d", c.noise.factor_D},
        {"quantization_step_m", c.noise.quantization_step},
        {"shuffle_radius_px", c.noise.shuffle_radius},
        {"hf_sigma_m", c.noise.hf_sigma}}},
      {"weights",
       {{"w_tr", c.weights.w_tr},
        {"w_sdf", c.weights.w_sdf},
        {"w_reg", c.weights.w_reg},
        {"w_icp", c.weights.w_icp}}},
      {"field",
       {{"levels", c.field.levels},
        {"features_per_level", c.field.features_per_level},
        {"table_size", c.field.table_size},
        {"base_resolution", c.field.base_resolution},
        {"growth_factor", c.field.growth_factor},
        {"mlp_layers", c.field.mlp_layers},
        {"mlp_width", c.field.mlp_width},
        {"bound_side_m", c.field.bound_side},
        {"bound_center", vec3_json(c.field.bound_center)},
        {"truncation_m", c.field.truncation}}},
      {"metrics",
       {{"tau_m", c.metrics.tau},
        {"samples", c.metrics.samples},
        {"failure_thresh_m", c.metrics.failure_thresh},
        {"grace_period_s", c.metrics.grace_period}}},
      {"tracker",
       {{"window", c.tracker.window},
        {"sdf_rays_per_frame", c.tracker.sdf_rays_per_frame},
        {"lm_iters", c.tracker.lm_iters},
        {"solves_per_step", c.tracker.solves_per_step},
        {"icp_max_points_vision", c.tracker.icp_max_points_vision},
        {"icp_max_points_tactile", c.tracker.icp_max_points_tactile},
        {"lost_mean_residual_m", c.tracker.lost_mean_residual}}},
      {"mapper",
       {{"replay_size", c.mapper.replay_size},
        {"bootstrap_iters", c.mapper.bootstrap_iters},
        {"replay_batch_per_sensor", c.mapper.replay_batch_per_sensor},
        {"keyframe_thresh_m", c.mapper.keyframe_thresh_m},
        {"forced_interval_s", c.mapper.forced_interval_s},
        {"shape_iters_per_step", c.mapper.shape_iters_per_step}}},
      {"extract",
       {{"resolution", c.extract.resolution},
        {"checkpoint_resolution", c.extract.checkpoint_resolution},
        {"checkpoint_period_s", c.extract.checkpoint_period_s},
        {"block", c.extract.block},
        {"slope_margin", c.extract.slope_margin}}},
      {"fit",
       {{"views", c.fit.views},
        {"view_radius_m", c.fit.view_radius_m},
        {"iterations", c.fit.iterations}}},
      {"bake",
       {{"field_path", c.bake.field_path},
        {"analytic", c.bake.analytic},
        {"max_steps", c.bake.max_steps},
        {"batch_size", c.bake.batch_size},
        {"target_mae_m", c.bake.target_mae_m},
        {"lr", c.bake.lr},
        {"seed", c.bake.seed}}},
      {"occlusion",
       {{"viewpoints", c.occlusion.viewpoints},
        {"radius_m", c.occlusion.radius_m}}},
      {"noise_sweep",
       {{"factors", c.noise_sweep.factors},
        {"modalities", modalities_json(c.noise_sweep.modalities)}}},
      {"seeds", c.seeds},
      {"duration_s", c.duration_s},
      {"playback_rate_hz", c.playback_rate_hz},
      {"sequence_dir", c.sequence_dir}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  out << config_to_json_text(cfg);
  if (!out) throw IoError("save_config: write failed for " + path);
}

std::string csv_num(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace vtsdf
