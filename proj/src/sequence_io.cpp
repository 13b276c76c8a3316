#include "vtsdf/sequence_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "vtsdf/errors.hpp"

namespace vtsdf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint16_t encode_px(float depth_m, double scale) {
  if (!depth_valid(depth_m)) return 0;
  const long long v = std::llround(double(depth_m) * scale);
  return uint16_t(std::clamp(v, 0ll, 65535ll));
}

float decode_px(uint16_t count, double scale) {
  return count == 0 ? kInvalidDepth : float(count / scale);
}

Image<uint16_t> encode_depth(const Image<float>& depth, double scale) {
  Image<uint16_t> out(depth.width, depth.height);
  for (size_t i = 0; i < depth.size(); ++i)
    out.data[i] = encode_px(depth.data[i], scale);
  return out;
}

Image<float> decode_depth(const Image<uint16_t>& counts, double scale) {
  Image<float> out(counts.width, counts.height);
  for (size_t i = 0; i < counts.size(); ++i)
    out.data[i] = decode_px(counts.data[i], scale);
  return out;
}

json pose_to_7tuple(const Pose& p) {
  return json::array(
      {p.q.w(), p.q.x(), p.q.y(), p.q.z(), p.t.x(), p.t.y(), p.t.z()});
}

Pose pose_from_7tuple(const json& j) {
  if (!j.is_array() || j.size() != 7)
    throw PlaybackError("manifest: pose is not a 7-tuple");
  Pose p;
  p.q = Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>());
  p.t = Vec3(j[4].get<double>(), j[5].get<double>(), j[6].get<double>());
  return p;
}

json sensor_to_json(const SensorModel& s) {
  return json{{"id", s.id},
              {"kind", s.kind == SensorModel::Kind::Vision ? "vision" : "tactile"},
              {"fx", s.fx},
              {"fy", s.fy},
              {"cx", s.cx},
              {"cy", s.cy},
              {"width", s.width},
              {"height", s.height},
              {"near_m", s.near_m},
              {"far_m", s.far_m},
              {"depth_scale", container_depth_scale(s)}};
}

SensorModel sensor_from_json(const json& j) {
  SensorModel s;
  s.id = j.at("id").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "vision")
    s.kind = SensorModel::Kind::Vision;
  else if (kind == "tactile")
    s.kind = SensorModel::Kind::Tactile;
  else
    throw PlaybackError("manifest: unknown sensor kind '" + kind + "'");
  s.fx = j.at("fx").get<double>();
  s.fy = j.at("fy").get<double>();
  s.cx = j.at("cx").get<double>();
  s.cy = j.at("cy").get<double>();
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.near_m = j.at("near_m").get<double>();
  s.far_m = j.at("far_m").get<double>();
  if (j.at("depth_scale").get<double>() != container_depth_scale(s))
    throw PlaybackError("manifest: depth_scale mismatch for sensor " + s.id);
  return s;
}

std::string frame_stem(int step, const std::string& sensor_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d_", step);
  return buf + sensor_id;
}

[[noreturn]] void playback_fail(int step, const std::string& what) {
  throw PlaybackError("playback: step " + std::to_string(step) + ": " + what);
}

}  // namespace

double container_depth_scale(const SensorModel& sensor) {
  return sensor.kind == SensorModel::Kind::Tactile ? 1e6 : 1e3;
}

void snap_to_container(SensorFrame& frame) {
  const double scale = container_depth_scale(frame.model);
  for (Image<float>* img : {&frame.depth, &frame.scene_depth})
    for (float& v : img->data) v = decode_px(encode_px(v, scale), scale);
}

void snap_to_container(std::vector<SequenceStep>& steps) {
  for (SequenceStep& step : steps)
    for (SensorFrame& f : step.frames) snap_to_container(f);
}

void record_sequence(const std::string& dir,
                     const std::vector<SequenceStep>& steps,
                     const std::string& name) {
  require(!steps.empty(), "record_sequence: empty step list");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("record_sequence: cannot create " + dir);

  std::map<std::string, const SensorModel*> sensors;  // id -> model, sorted
  json steps_json = json::array();
  for (size_t i = 0; i < steps.size(); ++i) {
    const SequenceStep& step = steps[i];
    require(std::isfinite(step.stamp),
            "record_sequence: non-finite stamp at step " + std::to_string(i));
    require(i == 0 || step.stamp > steps[i - 1].stamp,
            "record_sequence: stamps must be strictly increasing");

    json frames_json = json::array();
    for (const SensorFrame& f : step.frames) {
      const SensorModel& m = f.model;
      require(!m.id.empty(), "record_sequence: sensor without an id");
      auto [it, fresh] = sensors.emplace(m.id, &m);
      require(fresh || (it->second->width == m.width &&
                        it->second->height == m.height &&
                        it->second->kind == m.kind),
              "record_sequence: sensor " + m.id + " changes model mid-sequence");

      const double scale = container_depth_scale(m);
      const std::string stem = frame_stem(int(i), m.id);
      save_pgm16(encode_depth(f.depth, scale), dir + "/" + stem + "_depth.pgm");
      save_pgm16(encode_depth(f.scene_depth, scale),
                 dir + "/" + stem + "_scene.pgm");
      save_pbm(f.mask, dir + "/" + stem + "_mask.pbm");
      frames_json.push_back(json{{"sensor", m.id},
                                 {"pose", pose_to_7tuple(f.pose_world)},
                                 {"depth", stem + "_depth.pgm"},
                                 {"scene_depth", stem + "_scene.pgm"},
                                 {"mask", stem + "_mask.pbm"}});
    }
    steps_json.push_back(json{{"stamp", step.stamp},
                              {"object_pose", pose_to_7tuple(step.object_pose)},
                              {"frames", frames_json}});
  }

  json sensors_json = json::array();
  for (const auto& [id, model] : sensors) sensors_json.push_back(sensor_to_json(*model));

  const json manifest{{"format", "vtsdf-sequence"},
                      {"version", 1},
                      {"name", name},
                      {"sensors", sensors_json},
                      {"steps", steps_json}};
  std::ofstream out(dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("record_sequence: write failed for " + dir);
}

std::vector<SequenceStep> playback_sequence(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw PlaybackError("playback: cannot open " + dir + "/manifest.json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw PlaybackError(std::string("playback: bad manifest: ") + e.what());
  }

  try {
    if (manifest.at("format").get<std::string>() != "vtsdf-sequence" ||
        manifest.at("version").get<int>() != 1)
      throw PlaybackError("playback: not a version-1 vtsdf-sequence manifest");

    std::map<std::string, SensorModel> sensors;
    for (const json& js : manifest.at("sensors")) {
      SensorModel m = sensor_from_json(js);
      sensors.emplace(m.id, std::move(m));
    }

    std::vector<SequenceStep> steps;
    const json& steps_json = manifest.at("steps");
    steps.reserve(steps_json.size());
    for (const json& jstep : steps_json) {
      const int index = int(steps.size());
      SequenceStep step;
      step.stamp = jstep.at("stamp").get<double>();
      if (!steps.empty() && step.stamp <= steps.back().stamp)
        playback_fail(index, "stamps not strictly increasing");
      step.object_pose = pose_from_7tuple(jstep.at("object_pose"));

      for (const json& jf : jstep.at("frames")) {
        const std::string id = jf.at("sensor").get<std::string>();
        const auto it = sensors.find(id);
        if (it == sensors.end()) playback_fail(index, "unknown sensor " + id);

        SensorFrame f;
        f.model = it->second;
        f.stamp = step.stamp;
        f.pose_world = pose_from_7tuple(jf.at("pose"));
        const double scale = container_depth_scale(f.model);
        try {
          f.depth = decode_depth(
              load_pgm16(dir + "/" + jf.at("depth").get<std::string>()), scale);
          f.scene_depth = decode_depth(
              load_pgm16(dir + "/" + jf.at("scene_depth").get<std::string>()),
              scale);
          f.mask = load_pbm(dir + "/" + jf.at("mask").get<std::string>());
        } catch (const IoError& e) {
          playback_fail(index, e.what());
        }
        if (f.depth.width != f.model.width || f.depth.height != f.model.height ||
            f.mask.width != f.model.width || f.mask.height != f.model.height ||
            f.scene_depth.width != f.model.width ||
            f.scene_depth.height != f.model.height)
          playback_fail(index, "image size does not match sensor " + id);
        step.frames.push_back(std::move(f));
      }
      steps.push_back(std::move(step));
    }
    return steps;
  } catch (const json::exception& e) {
    throw PlaybackError(std::string("playback: bad manifest: ") + e.what());
  }
}

}  // namespace vtsdf
