#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vtsdf/rng.hpp"
#include "vtsdf/sensor_sim.hpp"

using namespace vtsdf;

namespace {

int mask_area(const SensorFrame& f) {
  int n = 0;
  for (uint8_t m : f.mask.data) n += m ? 1 : 0;
  return n;
}

SensorFrame make_flat_frame(int w, int h, int valid_count, float value) {
  SensorFrame f;
  f.model = SensorModel::vision_default();
  f.model.width = w;
  f.model.height = h;
  f.depth = Image<float>(w, h, kInvalidDepth);
  f.mask = Image<uint8_t>(w, h, 0);
  f.scene_depth = Image<float>(w, h, kInvalidDepth);
  for (int i = 0; i < valid_count; ++i) {
    int x = i % w, y = i / w;
    f.mask.at(x, y) = 1;
    f.depth.at(x, y) = value;
    f.scene_depth.at(x, y) = value;
  }
  return f;
}

}  // namespace

TEST_CASE("render: axial sphere gives center-pixel depth 0.2 - r") {
  auto obj = GroundTruthShape::sphere(0.03);
  auto cam = SensorModel::vision_default();
  Pose cam_pose = make_lookat_pose(Vec3(0, 0, 0.2), Vec3::Zero());
  auto f = render_frame(obj, Pose::identity(), {}, cam, cam_pose);
  int cx = int(cam.cx), cy = int(cam.cy);
  REQUIRE(f.mask.at(cx, cy) == 1);
  CHECK(f.depth.at(cx, cy) == doctest::Approx(0.17).epsilon(1e-4));
}

TEST_CASE("render: object fully behind an occluder has all-false mask") {
  auto obj = GroundTruthShape::sphere(0.02);
  auto cam = SensorModel::vision_default();
  Pose cam_pose = make_lookat_pose(Vec3(0, 0, 0.3), Vec3::Zero());
  OccluderSet occ;
  // fat capsule between camera and object, covering the whole view cone
  occ.capsules.push_back(
      GroundTruthShape::capsule(Vec3(-0.2, 0, 0.15), Vec3(0.2, 0, 0.15), 0.08));
  auto f = render_frame(obj, Pose::identity(), occ, cam, cam_pose);
  CHECK(mask_area(f) == 0);
  // scene depth still sees the occluder
  CHECK(depth_valid(f.scene_depth.at(int(cam.cx), int(cam.cy))));
  CHECK(f.scene_depth.at(int(cam.cx), int(cam.cy)) < 0.15);
}

TEST_CASE("render: tactile sensor against a flat box face matches the plane") {
  auto obj = GroundTruthShape::box(Vec3::Constant(0.06));
  auto tac = SensorModel::tactile_default("tac0");
  // sensor 1 mm above the +z face, looking straight down
  double d0 = 0.001;
  Pose pose = make_lookat_pose(Vec3(0, 0, 0.03 + d0), Vec3(0, 0, 0.03));
  auto f = render_frame(obj, Pose::identity(), {}, tac, pose);

  int valid = 0;
  double max_depth = 0;
  double worst = 0;
  for (int y = 0; y < tac.height; ++y)
    for (int x = 0; x < tac.width; ++x) {
      float d = f.depth.at(x, y);
      if (!depth_valid(d)) continue;
      ++valid;
      max_depth = std::max(max_depth, double(d));
      // analytic: depth of the face plane along this pixel ray, when the
      // ray lands inside the face square
      Vec3 p_cam = backproject(tac, x, y, d);
      Vec3 p_world = pose * p_cam;
      if (std::abs(p_world.x()) < 0.029 && std::abs(p_world.y()) < 0.029)
        worst = std::max(worst, std::abs(p_world.z() - 0.03));
    }
  CHECK(valid > 1000);
  CHECK(max_depth <= 0.02 + 1e-9);
  CHECK(worst < 1e-5);
}

TEST_CASE("render: masks are exact on sphere and box") {
  Rng rng(5);
  auto cam = SensorModel::vision_default();
  for (auto obj : {GroundTruthShape::sphere(0.03),
                   GroundTruthShape::box(Vec3(0.06, 0.05, 0.04))}) {
    Pose obj_pose = se3_exp(Twist{Vec3(0.2, -0.1, 0.4), Vec3(0.01, 0, -0.01)});
    Pose cam_pose = make_lookat_pose(Vec3(0.05, -0.28, 0.12), obj_pose.t);
    auto f = render_frame(obj, obj_pose, {}, cam, cam_pose);
    REQUIRE(mask_area(f) > 200);
    Pose inv = obj_pose.inverse();
    double worst = 0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        if (!f.mask.at(x, y)) continue;
        Vec3 p_world = cam_pose * backproject(cam, x, y, f.depth.at(x, y));
        worst = std::max(worst, std::abs(gt_sdf(obj, inv * p_world)));
      }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("corrupt_depth: D=0 is bit-identical") {
  auto obj = GroundTruthShape::sphere(0.03);
  auto cam = SensorModel::vision_default();
  auto f = render_frame(obj, Pose::identity(), {}, cam,
                        make_lookat_pose(Vec3(0, 0, 0.25), Vec3::Zero()));
  NoiseConfig cfg;
  cfg.factor_D = 0;
  auto g = corrupt_depth(f, cfg);
  for (size_t i = 0; i < f.depth.size(); ++i) {
    CHECK(std::memcmp(&f.depth.data[i], &g.depth.data[i], 4) == 0);
    CHECK(std::memcmp(&f.scene_depth.data[i], &g.scene_depth.data[i], 4) == 0);
  }
}

TEST_CASE("corrupt_depth: deterministic per seed, varies across seeds") {
  auto obj = GroundTruthShape::sphere(0.03);
  auto cam = SensorModel::vision_default();
  auto f = render_frame(obj, Pose::identity(), {}, cam,
                        make_lookat_pose(Vec3(0, 0, 0.25), Vec3::Zero()), 1.5);
  NoiseConfig cfg;
  cfg.factor_D = 5;
  cfg.seed = 42;
  auto a = corrupt_depth(f, cfg);
  auto b = corrupt_depth(f, cfg);
  CHECK(std::memcmp(a.depth.data.data(), b.depth.data.data(),
                    a.depth.size() * 4) == 0);
  cfg.seed = 43;
  auto c = corrupt_depth(f, cfg);
  CHECK(std::memcmp(a.depth.data.data(), c.depth.data.data(),
                    a.depth.size() * 4) != 0);
}

TEST_CASE("corrupt_depth: mean |delta| grows with D (10 seeds)") {
  auto obj = GroundTruthShape::sphere(0.03);
  auto cam = SensorModel::vision_default();
  auto f = render_frame(obj, Pose::identity(), {}, cam,
                        make_lookat_pose(Vec3(0, 0, 0.25), Vec3::Zero()));
  auto mean_abs_delta = [&](const SensorFrame& g) {
    double sum = 0;
    int n = 0;
    for (size_t i = 0; i < f.depth.size(); ++i) {
      if (!depth_valid(f.depth.data[i])) continue;
      sum += std::abs(double(g.depth.data[i]) - double(f.depth.data[i]));
      ++n;
    }
    return sum / n;
  };
  for (uint64_t seed = 0; seed < 10; ++seed) {
    NoiseConfig lo, hi;
    lo.factor_D = 10;
    hi.factor_D = 50;
    lo.seed = hi.seed = seed;
    CHECK(mean_abs_delta(corrupt_depth(f, hi)) >
          mean_abs_delta(corrupt_depth(f, lo)));
  }
}

TEST_CASE("corrupt_depth: never converts invalid to valid; mask unchanged") {
  auto obj = GroundTruthShape::sphere(0.03);
  auto cam = SensorModel::vision_default();
  auto f = render_frame(obj, Pose::identity(), {}, cam,
                        make_lookat_pose(Vec3(0.1, 0.1, 0.25), Vec3::Zero()));
  NoiseConfig cfg;
  cfg.factor_D = 50;
  auto g = corrupt_depth(f, cfg);
  for (size_t i = 0; i < f.depth.size(); ++i) {
    CHECK(f.mask.data[i] == g.mask.data[i]);
    if (!depth_valid(f.depth.data[i])) CHECK(!depth_valid(g.depth.data[i]));
    if (depth_valid(g.depth.data[i])) {
      CHECK(g.depth.data[i] >= f.near_m());
      CHECK(g.depth.data[i] <= f.far_m());
    }
  }
}

TEST_CASE("occlusion_score: hand-computed cases") {
  SUBCASE("single viewpoint scores 1.0") {
    auto s = occlusion_score({{make_flat_frame(30, 20, 100, 0.2f)}});
    REQUIRE(s.size() == 1);
    CHECK(s[0] == doctest::Approx(1.0));
  }
  SUBCASE("areas 100/300/500 map to 0 / 0.5 / 1") {
    auto s = occlusion_score({{make_flat_frame(30, 20, 100, 0.2f)},
                              {make_flat_frame(30, 20, 300, 0.2f)},
                              {make_flat_frame(30, 20, 500, 0.2f)}});
    REQUIRE(s.size() == 3);
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == doctest::Approx(1.0));
  }
  SUBCASE("all-false viewpoint scores 0 when max is nonzero") {
    auto s = occlusion_score({{make_flat_frame(30, 20, 0, 0.2f)},
                              {make_flat_frame(30, 20, 400, 0.2f)}});
    CHECK(s[0] == doctest::Approx(0.0));
  }
  SUBCASE("frame order within a viewpoint does not matter") {
    auto a = make_flat_frame(30, 20, 100, 0.2f);
    auto b = make_flat_frame(30, 20, 200, 0.2f);
    auto s1 = occlusion_score({{a, b}, {make_flat_frame(30, 20, 400, 0.2f)}});
    auto s2 = occlusion_score({{b, a}, {make_flat_frame(30, 20, 400, 0.2f)}});
    CHECK(s1[0] == doctest::Approx(s2[0]));
  }
  SUBCASE("empty input raises") {
    CHECK_THROWS_AS(occlusion_score({}), EmptySet);
  }
}

TEST_CASE("camera_sphere: n=1 sits on top; n=200 all at radius") {
  Vec3 center(0.1, -0.2, 0.3);
  auto single = camera_sphere(1, 0.5, center);
  REQUIRE(single.size() == 1);
  CHECK((single[0].t - (center + Vec3(0, 0, 0.5))).norm() < 1e-12);

  auto poses = camera_sphere(200, 0.5, center);
  REQUIRE(poses.size() == 200);
  for (const auto& p : poses)
    CHECK(std::abs((p.t - center).norm() - 0.5) < 1e-9);
}

TEST_CASE("camera_sphere: poses look at the center") {
  Vec3 center(0.05, 0.02, -0.1);
  for (const auto& p : camera_sphere(37, 0.4, center)) {
    Vec3 fwd = p.rotation().col(2);
    Vec3 expect = (center - p.t).normalized();
    CHECK((fwd - expect).norm() < 1e-9);
  }
}

TEST_CASE("camera_sphere: positive minimum pairwise angular separation") {
  for (int n : {4, 50, 200}) {
    auto poses = camera_sphere(n, 1.0, Vec3::Zero());
    double min_sep = M_PI;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double c = std::clamp(poses[i].t.dot(poses[j].t), -1.0, 1.0);
        min_sep = std::min(min_sep, std::acos(c));
      }
    CHECK(min_sep > 1e-3);
  }
}

TEST_CASE("scripted_trajectory: 90 deg/s about z yields yaw 90 at t=1") {
  TrajectoryParams params;
  params.kind = TrajectoryParams::Kind::AxisRotation;
  params.rate_deg_s = 90;
  auto steps = scripted_trajectory(GroundTruthShape::sphere(0.03), params, 2, 1);
  REQUIRE(steps.size() == 2);
  Vec3 rotated = steps[1].object_pose.q * Vec3::UnitX();
  CHECK((rotated - Vec3::UnitY()).norm() < 1e-9);
}

TEST_CASE("scripted_trajectory: static object keeps tactile poses constant") {
  TrajectoryParams params;
  params.rate_deg_s = 0;
  params.anchors = {Vec3(0.2, 0, 0), Vec3(0, 0.2, 0.05)};
  auto obj = GroundTruthShape::box(Vec3::Constant(0.06));
  auto steps = scripted_trajectory(obj, params, 5, 1);
  REQUIRE(steps.size() == 5);
  REQUIRE(steps[0].tactile_poses.size() == 2);
  for (const auto& s : steps) {
    REQUIRE(s.tactile_poses.size() == 2);
    for (size_t k = 0; k < 2; ++k) {
      CHECK((s.tactile_poses[k].second.t - steps[0].tactile_poses[k].second.t)
                .norm() < 1e-12);
      CHECK(rotation_angle_between(s.tactile_poses[k].second,
                                   steps[0].tactile_poses[k].second) < 1e-12);
    }
  }
}

TEST_CASE("scripted_trajectory: tactile origins sit on the sphere surface") {
  TrajectoryParams params;
  params.kind = TrajectoryParams::Kind::WobbleRotation;
  params.rate_deg_s = 30;
  params.tilt_deg = 8;
  params.trans_amp_m = 0.004;
  params.anchors = {Vec3(0.25, 0, 0), Vec3(-0.2, 0.1, 0.02), Vec3(0, -0.22, -0.05),
                    Vec3(0.05, 0.05, 0.25)};
  auto obj = GroundTruthShape::sphere(0.03);
  auto steps = scripted_trajectory(obj, params, 10, 1);
  int contacts = 0;
  for (const auto& s : steps) {
    Pose inv = s.object_pose.inverse();
    for (const auto& [id, pose] : s.tactile_poses) {
      ++contacts;
      CHECK(std::abs(gt_sdf(obj, inv * pose.t)) < 2e-3);
      // optical axis faces the surface: marching from the origin must hit
      Vec3 d_obj = inv.q * pose.rotation().col(2);
      CHECK(raycast(obj, inv * pose.t, d_obj, 0.01).has_value());
    }
  }
  CHECK(contacts == 40);
}

TEST_CASE("scripted_trajectory: parameter validation") {
  TrajectoryParams params;
  params.kind = TrajectoryParams::Kind::WobbleRotation;
  params.tilt_deg = 11;  // over the 10 deg limit
  CHECK_THROWS_AS(
      scripted_trajectory(GroundTruthShape::sphere(0.03), params, 1, 1),
      InvalidParams);
}
