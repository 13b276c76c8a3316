#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "vtsdf/bake.hpp"
#include "vtsdf/errors.hpp"
#include "vtsdf/marching_cubes.hpp"
#include "vtsdf/metrics.hpp"
#include "vtsdf/rng.hpp"
#include "vtsdf/shapes.hpp"

using namespace vtsdf;

namespace {

struct CountingField : DistanceField {
  const DistanceField* base;
  mutable size_t evals = 0;

  explicit CountingField(const DistanceField& b) : base(&b) {}
  void eval(const Pose& pose, const std::vector<Vec3>& pts, VecX& out,
            std::vector<uint8_t>* oob) const override {
    evals += pts.size();
    base->eval(pose, pts, out, oob);
  }
  void eval_with_gradient(const Pose& pose, const std::vector<Vec3>& pts,
                          VecX& out, std::vector<Vec3>& grad,
                          std::vector<uint8_t>* oob) const override {
    evals += pts.size();
    base->eval_with_gradient(pose, pts, out, grad, oob);
  }
};

// Truncation-style plateau: slope 1 in a band around the surface, flat
// beyond it, like a freshly trained online field.
struct ClampedField : DistanceField {
  GroundTruthShape shape;
  double clip;

  ClampedField(GroundTruthShape s, double c) : shape(std::move(s)), clip(c) {}
  void eval(const Pose& pose, const std::vector<Vec3>& pts, VecX& out,
            std::vector<uint8_t>* oob) const override {
    const Pose inv = pose.inverse();
    out.resize(int(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i)
      out[int(i)] = std::clamp(gt_sdf(shape, inv * pts[i]), -clip, clip);
    if (oob) oob->assign(pts.size(), 0);
  }
  void eval_with_gradient(const Pose& pose, const std::vector<Vec3>& pts,
                          VecX& out, std::vector<Vec3>& grad,
                          std::vector<uint8_t>* oob) const override {
    eval(pose, pts, out, oob);
    grad.assign(pts.size(), Vec3::Zero());
  }
};

struct ConstantField : DistanceField {
  double value;

  explicit ConstantField(double v) : value(v) {}
  void eval(const Pose&, const std::vector<Vec3>& pts, VecX& out,
            std::vector<uint8_t>* oob) const override {
    out = VecX::Constant(int(pts.size()), value);
    if (oob) oob->assign(pts.size(), 0);
  }
  void eval_with_gradient(const Pose& pose, const std::vector<Vec3>& pts,
                          VecX& out, std::vector<Vec3>& grad,
                          std::vector<uint8_t>* oob) const override {
    eval(pose, pts, out, oob);
    grad.assign(pts.size(), Vec3::Zero());
  }
};

bool same_mesh(const TriangleMesh& a, const TriangleMesh& b) {
  if (a.vertices.size() != b.vertices.size()) return false;
  if (a.faces.size() != b.faces.size()) return false;
  for (size_t i = 0; i < a.vertices.size(); ++i)
    if (a.vertices[i].x() != b.vertices[i].x() ||
        a.vertices[i].y() != b.vertices[i].y() ||
        a.vertices[i].z() != b.vertices[i].z())
      return false;
  for (size_t i = 0; i < a.faces.size(); ++i)
    if (a.faces[i] != b.faces[i]) return false;
  return true;
}

// Closest-point scan over every triangle; oracle for the gridded queries.
double brute_surface_distance(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Eigen::Vector3i& f : mesh.faces) {
    const Vec3 c = closest_point_on_triangle(p, mesh.vertices[f[0]],
                                             mesh.vertices[f[1]],
                                             mesh.vertices[f[2]]);
    best = std::min(best, (p - c).norm());
  }
  return best;
}

Pose random_pose(Rng& rng, double rot, double trans) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  Pose p;
  p.q = Quat(Eigen::AngleAxisd(rng.uniform(-rot, rot), axis));
  p.t = Vec3(rng.uniform(-trans, trans), rng.uniform(-trans, trans),
             rng.uniform(-trans, trans));
  return p;
}

// Two triangles spanning a square plate in the z = 0 plane.
TriangleMesh make_plate(double side) {
  const double h = side / 2;
  TriangleMesh m;
  m.vertices = {Vec3(-h, -h, 0), Vec3(h, -h, 0), Vec3(h, h, 0),
                Vec3(-h, h, 0)};
  m.faces = {Eigen::Vector3i(0, 1, 2), Eigen::Vector3i(0, 2, 3)};
  return m;
}

TriangleMesh upper_half(const TriangleMesh& mesh) {
  TriangleMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const Eigen::Vector3i& f : mesh.faces) {
    const Vec3 centroid = (mesh.vertices[f[0]] + mesh.vertices[f[1]] +
                           mesh.vertices[f[2]]) /
                          3.0;
    if (centroid.z() <= 0.0) continue;
    Eigen::Vector3i g;
    for (int k = 0; k < 3; ++k) {
      int& slot = remap[f[k]];
      if (slot < 0) {
        slot = int(out.vertices.size());
        out.vertices.push_back(mesh.vertices[f[k]]);
      }
      g[k] = slot;
    }
    out.faces.push_back(g);
  }
  return out;
}

Pose translation(const Vec3& t) {
  Pose p;
  p.t = t;
  return p;
}

// The 24 rotations mapping an axis-aligned cube onto itself.
std::vector<Quat> cube_rotations() {
  std::vector<Quat> out;
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  std::set<std::array<long long, 9>> seen;
  for (int a = 0; a < 3; ++a)
    for (int ka = 0; ka < 4; ++ka)
      for (int b = 0; b < 3; ++b)
        for (int kb = 0; kb < 4; ++kb) {
          Quat q = Quat(Eigen::AngleAxisd(ka * M_PI / 2, axes[a])) *
                   Quat(Eigen::AngleAxisd(kb * M_PI / 2, axes[b]));
          Mat3 r = q.toRotationMatrix();
          std::array<long long, 9> key;
          for (int i = 0; i < 9; ++i) key[i] = llround(r(i / 3, i % 3));
          if (seen.insert(key).second) out.push_back(q);
        }
  return out;
}

}  // namespace

// --- iso-surface extraction -------------------------------------------------

TEST_CASE("marching cubes reproduces an analytic sphere") {
  const double r = 0.03;
  const int n = 48;
  const double side = 0.12;
  const Vec3 origin = Vec3::Constant(-side / 2);
  const double cell = side / n;
  const auto shape = GroundTruthShape::sphere(r);
  std::vector<double> vals;
  vals.reserve(size_t(n + 1) * (n + 1) * (n + 1));
  for (int z = 0; z <= n; ++z)
    for (int y = 0; y <= n; ++y)
      for (int x = 0; x <= n; ++x)
        vals.push_back(gt_sdf(shape, origin + cell * Vec3(x, y, z)));

  const TriangleMesh mesh = marching_cubes(vals, n, n, n, origin, cell, 0.0);
  REQUIRE(!mesh.empty());
  double worst = 0.0;
  for (const Vec3& v : mesh.vertices)
    worst = std::max(worst, std::abs(v.norm() - r));
  CHECK(worst < 5e-4);
  CHECK(is_watertight(mesh));
  CHECK(euler_characteristic(mesh) == 2);
  // Positive signed volume means outward winding.
  const double ball = 4.0 / 3.0 * M_PI * r * r * r;
  CHECK(mesh_volume(mesh) == doctest::Approx(ball).epsilon(0.02));
  for (const Eigen::Vector3i& f : mesh.faces) {
    const Vec3 centroid = (mesh.vertices[f[0]] + mesh.vertices[f[1]] +
                           mesh.vertices[f[2]]) /
                          3.0;
    const Vec3 nrm = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                         .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    CHECK(nrm.dot(centroid) > 0.0);
  }
}

TEST_CASE("coarse-to-fine extraction matches the dense pass bit for bit") {
  const std::vector<GroundTruthShape> shapes = {
      GroundTruthShape::sphere(0.031),
      GroundTruthShape::capsule(Vec3(-0.02, 0.004, -0.007),
                                Vec3(0.018, -0.006, 0.011), 0.012),
      GroundTruthShape::rounded_box(Vec3(0.05, 0.034, 0.042), 0.006),
  };
  for (const auto& shape : shapes) {
    const AnalyticDistanceField field(shape);
    for (int res : {48, 33}) {  // 33 exercises clipped edge blocks
      ExtractConfig coarse;
      coarse.resolution = res;
      coarse.block = 4;
      coarse.largest_component_only = false;
      ExtractConfig dense = coarse;
      dense.block = 0;
      const TriangleMesh a = extract_mesh(field, Vec3::Zero(), 0.12, coarse);
      const TriangleMesh b = extract_mesh(field, Vec3::Zero(), 0.12, dense);
      CHECK(same_mesh(a, b));
      CHECK(!a.empty());
    }
  }
}

TEST_CASE("plateau blocks are skipped without changing the mesh") {
  // Fine grid over a truncated field: the flat +/-5 mm plateau clears the
  // refine threshold, so only the transition band is evaluated densely.
  const ClampedField field(GroundTruthShape::sphere(0.031), 0.005);
  ExtractConfig cfg;
  cfg.resolution = 160;
  cfg.block = 4;
  cfg.largest_component_only = false;

  const CountingField counted(field);
  const TriangleMesh hier = extract_mesh(counted, Vec3::Zero(), 0.12, cfg);
  const size_t hier_evals = counted.evals;

  ExtractConfig dense_cfg = cfg;
  dense_cfg.block = 0;
  counted.evals = 0;
  const TriangleMesh dense =
      extract_mesh(counted, Vec3::Zero(), 0.12, dense_cfg);
  const size_t dense_evals = counted.evals;

  CHECK(same_mesh(hier, dense));
  CHECK(hier_evals * 4 < dense_evals);
  double worst = 0.0;
  for (const Vec3& v : hier.vertices)
    worst = std::max(worst, std::abs(v.norm() - 0.031));
  CHECK(worst < 5e-4);
}

TEST_CASE("all-positive field gives no surface") {
  const ConstantField field(0.005);
  CHECK_THROWS_AS(extract_mesh(field, Vec3::Zero(), 0.12, {}), EmptySurface);
}

TEST_CASE("largest component keeps the bigger blob") {
  // Two disjoint spheres via degenerate capsules.
  const auto shape = GroundTruthShape::union_of(
      {GroundTruthShape::capsule(Vec3(-0.035, 0, 0), Vec3(-0.035, 0, 0), 0.02),
       GroundTruthShape::capsule(Vec3(0.04, 0, 0), Vec3(0.04, 0, 0), 0.01)});
  const AnalyticDistanceField field(shape);
  ExtractConfig cfg;
  cfg.resolution = 64;
  cfg.largest_component_only = false;
  const TriangleMesh both = extract_mesh(field, Vec3::Zero(), 0.15, cfg);
  CHECK(euler_characteristic(both) == 4);  // two closed components

  cfg.largest_component_only = true;
  const TriangleMesh big = extract_mesh(field, Vec3::Zero(), 0.15, cfg);
  CHECK(euler_characteristic(big) == 2);
  CHECK(big.faces.size() < both.faces.size());
  for (const Vec3& v : big.vertices)
    CHECK((v - Vec3(-0.035, 0, 0)).norm() == doctest::Approx(0.02).epsilon(0.05));
  CHECK(mesh_area(big) > mesh_area(both) / 2);
}

TEST_CASE("exact lattice zeros produce a clean open sheet") {
  // 4^3 cells; value = z-index - 2 puts lattice points exactly on the level.
  const int n = 4;
  std::vector<double> vals;
  for (int z = 0; z <= n; ++z)
    for (int y = 0; y <= n; ++y)
      for (int x = 0; x <= n; ++x) vals.push_back(double(z - 2));
  const TriangleMesh m =
      marching_cubes(vals, n, n, n, Vec3::Zero(), 0.01, 0.0);
  CHECK(m.faces.size() == 32);  // 16 cells, two triangles each
  CHECK(int(m.vertices.size()) == 25);
  for (const Vec3& v : m.vertices) {
    CHECK(std::isfinite(v.sum()));
    CHECK(v.z() == 0.02);
  }
  for (const Eigen::Vector3i& f : m.faces) {
    CHECK(f[0] != f[1]);
    CHECK(f[1] != f[2]);
    CHECK(f[0] != f[2]);
  }
  CHECK(euler_characteristic(m) == 1);  // disk topology
}

TEST_CASE("baked sphere extracts within a millimetre") {
  FieldConfig fc;
  fc.levels = 4;
  fc.table_size = 1 << 13;
  fc.base_resolution = 8;
  fc.growth_factor = 1.6;
  fc.mlp_width = 32;
  BakeOptions opts;
  opts.batch_size = 1024;
  opts.max_steps = 4000;
  opts.target_mae = 4e-4;
  opts.lr = 2e-3;
  opts.pool_size = 20000;
  opts.heldout_size = 2000;
  const auto baked =
      bake_field_from_shape(fc, GroundTruthShape::sphere(0.03), opts);
  const NeuralDistanceField field(&baked.params);

  ExtractConfig cfg;
  cfg.resolution = 64;
  const TriangleMesh mesh =
      extract_mesh(field, fc.bound_center, fc.bound_side, cfg);
  REQUIRE(!mesh.empty());
  double sum = 0.0;
  for (const Vec3& v : mesh.vertices) sum += std::abs(v.norm() - 0.03);
  CHECK(sum / double(mesh.vertices.size()) < 1e-3);
  CHECK(euler_characteristic(mesh) == 2);
  CHECK(is_watertight(mesh));
  CHECK(mesh_volume(mesh) > 0.0);

  // The learned field is smooth enough for the coarse pass to stay exact.
  ExtractConfig dense = cfg;
  dense.block = 0;
  dense.largest_component_only = false;
  ExtractConfig hier = dense;
  hier.block = 4;
  CHECK(same_mesh(extract_mesh(field, fc.bound_center, fc.bound_side, hier),
                  extract_mesh(field, fc.bound_center, fc.bound_side, dense)));
}

TEST_CASE("finer grids do not lose reconstruction accuracy") {
  const AnalyticDistanceField field(GroundTruthShape::sphere(0.03));
  const TriangleMesh gt = make_icosphere(0.03, 3);
  ExtractConfig cfg;
  cfg.resolution = 32;
  const TriangleMesh lo = extract_mesh(field, Vec3::Zero(), 0.12, cfg);
  cfg.resolution = 64;
  const TriangleMesh hi = extract_mesh(field, Vec3::Zero(), 0.12, cfg);
  const FScore f_lo = fscore(gt, lo, 4e-4, 20000, 7);
  const FScore f_hi = fscore(gt, hi, 4e-4, 20000, 7);
  CHECK(f_hi.f >= f_lo.f - 0.01);
}

// --- pose drift ---------------------------------------------------------------

TEST_CASE("drift is zero under identical poses") {
  const TriangleMesh mesh = make_box_mesh(Vec3::Constant(0.06));
  Rng rng(3);
  const Pose pose = random_pose(rng, 0.5, 0.1);
  MetricsConfig cfg;
  cfg.samples = 2000;
  CHECK(add_s(mesh, pose, pose, cfg) < 1e-12);
}

TEST_CASE("closest-point drift matches a per-triangle scan") {
  const std::vector<TriangleMesh> meshes = {
      make_box_mesh(Vec3(0.06, 0.05, 0.04)), make_icosphere(0.03, 2)};
  MetricsConfig cfg;
  cfg.samples = 1500;
  cfg.seed = 11;
  Rng rng(5);
  for (const auto& mesh : meshes) {
    for (int trial = 0; trial < 3; ++trial) {
      const Pose est = random_pose(rng, 0.2, 0.005);
      const Pose gt = random_pose(rng, 0.2, 0.005);
      const double got = add_s(mesh, est, gt, cfg);

      Rng sample_rng(cfg.seed);
      const auto pts = sample_mesh_points(mesh, cfg.samples, sample_rng);
      const Pose rel = gt.inverse() * est;
      double want = 0.0;
      for (const Vec3& p : pts) want += brute_surface_distance(mesh, rel * p);
      want /= double(pts.size());
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("cube symmetries leave closest-point drift unchanged") {
  const TriangleMesh cube = make_box_mesh(Vec3::Constant(0.06));
  MetricsConfig cfg;
  cfg.samples = 10000;
  Rng rng(17);
  const Pose gt = random_pose(rng, 0.4, 0.05);

  // A quarter turn is invisible to the symmetric metric but not to
  // point-correspondence distance.
  Pose quarter;
  quarter.q = Quat(Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()));
  CHECK(add_s(cube, gt * quarter, gt, cfg) < 1e-9);
  Rng sample_rng(cfg.seed);
  const auto pts = sample_mesh_points(cube, cfg.samples, sample_rng);
  double paired = 0.0;
  for (const Vec3& p : pts) paired += (quarter * p - p).norm();
  CHECK(paired / double(pts.size()) > 0.01);

  // Invariance across the whole rotation group, against a perturbed pose.
  const Pose est = gt * random_pose(rng, 0.05, 0.002);
  const double base = add_s(cube, est, gt, cfg);
  const auto group = cube_rotations();
  CHECK(group.size() == 24);
  for (const Quat& q : group) {
    Pose sym;
    sym.q = q;
    CHECK(std::abs(add_s(cube, est * sym, gt, cfg) - base) < 2e-4);
  }
}

TEST_CASE("translation drift bounds") {
  MetricsConfig cfg;
  cfg.samples = 4000;
  // Normal translation of a flat plate: every sample moves exactly 4 mm.
  const TriangleMesh plate = make_plate(0.06);
  const double plate_drift =
      add_s(plate, translation(Vec3(0, 0, 0.004)), Pose(), cfg);
  CHECK(plate_drift == doctest::Approx(0.004).epsilon(1e-12));

  // On a closed box the faces parallel to the motion slide along themselves,
  // so the mean drops below the 4 mm upper bound.
  const TriangleMesh box = make_box_mesh(Vec3::Constant(0.06));
  const double box_drift =
      add_s(box, translation(Vec3(0.004, 0, 0)), Pose(), cfg);
  CHECK(box_drift <= 0.004 + 1e-12);
  CHECK(box_drift > 0.001);
  CHECK(box_drift < 0.0035);
}

// --- F-score -----------------------------------------------------------------

TEST_CASE("identical meshes score perfect precision and recall") {
  const TriangleMesh mesh = make_icosphere(0.03, 2);
  const FScore s = fscore(mesh, mesh, 0.005, 3000, 2);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f == 1.0);
}

TEST_CASE("precision and recall swap under argument exchange") {
  const TriangleMesh a = make_icosphere(0.03, 2);
  const TriangleMesh b = make_box_mesh(Vec3::Constant(0.05));
  const FScore ab = fscore(a, b, 0.004, 5000, 9);
  const FScore ba = fscore(b, a, 0.004, 5000, 9);
  CHECK(ab.precision == ba.recall);
  CHECK(ab.recall == ba.precision);
}

TEST_CASE("fscore matches a per-triangle scan") {
  const TriangleMesh gt = make_box_mesh(Vec3(0.05, 0.04, 0.06));
  const TriangleMesh recon = make_icosphere(0.028, 2);
  const double tau = 0.003;
  const int samples = 800;
  const uint64_t seed = 21;
  const FScore got = fscore(gt, recon, tau, samples, seed);

  Rng rng_a(seed), rng_b(seed);
  const auto recon_pts = sample_mesh_points(recon, samples, rng_a);
  const auto gt_pts = sample_mesh_points(gt, samples, rng_b);
  int hit = 0;
  for (const Vec3& p : recon_pts) hit += brute_surface_distance(gt, p) <= tau;
  const double precision = double(hit) / samples;
  hit = 0;
  for (const Vec3& p : gt_pts) hit += brute_surface_distance(recon, p) <= tau;
  const double recall = double(hit) / samples;

  CHECK(got.precision == doctest::Approx(precision).epsilon(1e-12));
  CHECK(got.recall == doctest::Approx(recall).epsilon(1e-12));
  CHECK(got.f ==
        doctest::Approx(2 * precision * recall / (precision + recall))
            .epsilon(1e-12));
}

TEST_CASE("half surface halves recall but not precision") {
  const TriangleMesh full = make_icosphere(0.03, 3);
  const TriangleMesh half = upper_half(full);
  REQUIRE(!half.empty());
  const FScore s = fscore(full, half, 0.001, 20000, 13);
  CHECK(s.precision == 1.0);
  CHECK(s.recall > 0.48);
  CHECK(s.recall < 0.58);
  CHECK(s.f == doctest::Approx(2 * s.recall / (1 + s.recall)).epsilon(1e-12));
}

TEST_CASE("thin shell shifted past the threshold scores zero") {
  const TriangleMesh plate = make_plate(0.06);
  TriangleMesh shifted = plate;
  const double tau = 0.002;
  for (Vec3& v : shifted.vertices) v.z() += 2 * tau;
  const FScore s = fscore(plate, shifted, tau, 2000, 4);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
  CHECK(s.f == 0.0);
}

TEST_CASE("threshold sweep is monotone and consistent") {
  const TriangleMesh gt = make_icosphere(0.03, 2);
  const TriangleMesh recon = make_box_mesh(Vec3::Constant(0.05));
  const std::vector<double> taus = {0.0005, 0.001, 0.002, 0.005, 0.01};
  const auto curve = fscore_curve(gt, recon, taus, 4000, 6);
  REQUIRE(curve.size() == taus.size());
  for (size_t i = 0; i + 1 < curve.size(); ++i) {
    CHECK(curve[i].precision <= curve[i + 1].precision);
    CHECK(curve[i].recall <= curve[i + 1].recall);
  }
  for (size_t i = 0; i < taus.size(); ++i) {
    const FScore single = fscore(gt, recon, taus[i], 4000, 6);
    CHECK(curve[i].precision == single.precision);
    CHECK(curve[i].recall == single.recall);
    CHECK(curve[i].f == single.f);
  }
}

// --- coverage labels -----------------------------------------------------------

TEST_CASE("coverage labelling follows the nearest measurement") {
  const TriangleMesh mesh = make_icosphere(0.03, 1);
  const Vec3 v0 = mesh.vertices[0];

  const auto none = coverage_labels(mesh, {}, {}, 0.005);
  REQUIRE(none.size() == mesh.vertices.size());
  for (auto l : none) CHECK(l == CoverageLabel::Hallucinated);

  // Lone touch point 1 mm off one vertex.
  const auto touch_only =
      coverage_labels(mesh, {}, {v0 + Vec3(0.001, 0, 0)}, 0.005);
  CHECK(touch_only[0] == CoverageLabel::Touch);
  int hallucinated = 0;
  for (auto l : touch_only) hallucinated += l == CoverageLabel::Hallucinated;
  CHECK(hallucinated > int(mesh.vertices.size()) / 2);

  // Equidistant measurements resolve to vision.
  const auto tied = coverage_labels(mesh, {v0 + Vec3(0.002, 0, 0)},
                                    {v0 - Vec3(0.002, 0, 0)}, 0.005);
  CHECK(tied[0] == CoverageLabel::Vision);

  // Measurements just inside the radius count; just outside do not.
  const auto at_radius =
      coverage_labels(mesh, {v0 + Vec3(0.00499, 0, 0)}, {}, 0.005);
  CHECK(at_radius[0] == CoverageLabel::Vision);
  const auto past_radius =
      coverage_labels(mesh, {v0 + Vec3(0.00501, 0, 0)}, {}, 0.005);
  CHECK(past_radius[0] == CoverageLabel::Hallucinated);
}

// --- drift report ---------------------------------------------------------------

TEST_CASE("drift report applies grace period and failure threshold") {
  const TriangleMesh plate = make_plate(0.06);
  MetricsConfig cfg;
  cfg.samples = 1000;

  std::vector<TimedPose> gt, est;
  for (int i = 0; i < 30; ++i) {
    TimedPose tp;
    tp.stamp = double(i);
    gt.push_back(tp);
    est.push_back(tp);
  }

  SUBCASE("perfect tracking") {
    const DriftReport rep = drift_report(est, gt, plate, cfg);
    REQUIRE(rep.stamps.size() == 25);  // grace drops stamps 0..4
    CHECK(rep.stamps.front() == 5.0);
    CHECK(rep.mean < 1e-12);
    CHECK(!rep.failed);
  }

  SUBCASE("constant 12 mm offset fails") {
    for (auto& tp : est) tp.pose.t = Vec3(0, 0, 0.012);
    const DriftReport rep = drift_report(est, gt, plate, cfg);
    CHECK(rep.mean == doctest::Approx(0.012).epsilon(1e-9));
    CHECK(rep.failed);
  }

  SUBCASE("early transient is forgiven") {
    for (int i = 0; i < 5; ++i) est[i].pose.t = Vec3(0, 0, 0.012);
    const DriftReport rep = drift_report(est, gt, plate, cfg);
    CHECK(rep.mean < 1e-12);
    CHECK(!rep.failed);
  }

  SUBCASE("stamp disagreements are rejected") {
    est.pop_back();
    CHECK_THROWS_AS(drift_report(est, gt, plate, cfg), StampMismatch);
    est = gt;
    est[12].stamp += 0.5;
    CHECK_THROWS_AS(drift_report(est, gt, plate, cfg), StampMismatch);
  }
}

// --- plumbing -------------------------------------------------------------------

TEST_CASE("metric calls are deterministic") {
  const TriangleMesh mesh = make_icosphere(0.03, 2);
  Rng rng(8);
  const Pose est = random_pose(rng, 0.3, 0.01);
  const Pose gt = random_pose(rng, 0.3, 0.01);
  MetricsConfig cfg;
  cfg.samples = 1500;
  CHECK(add_s(mesh, est, gt, cfg) == add_s(mesh, est, gt, cfg));
  const TriangleMesh box = make_box_mesh(Vec3::Constant(0.05));
  const FScore a = fscore(mesh, box, 0.003, 1500, 5);
  const FScore b = fscore(mesh, box, 0.003, 1500, 5);
  CHECK(a.precision == b.precision);
  CHECK(a.recall == b.recall);
}

TEST_CASE("degenerate inputs are rejected") {
  const TriangleMesh empty;
  const TriangleMesh mesh = make_icosphere(0.02, 1);
  MetricsConfig cfg;
  CHECK_THROWS_AS(add_s(empty, Pose(), Pose(), cfg), EmptyMesh);
  CHECK_THROWS_AS(fscore(empty, mesh, 0.005, 100), EmptyMesh);
  CHECK_THROWS_AS(fscore(mesh, empty, 0.005, 100), EmptyMesh);
  CHECK_THROWS_AS(drift_report({}, {}, empty, cfg), EmptyMesh);

  MetricsConfig bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS_AS(add_s(mesh, Pose(), Pose(), bad), InvalidParams);
  CHECK_THROWS_AS(fscore(mesh, mesh, -0.001, 100), InvalidParams);

  ExtractConfig ec;
  ec.resolution = 0;
  const ConstantField field(0.005);
  CHECK_THROWS_AS(extract_mesh(field, Vec3::Zero(), 0.1, ec), InvalidParams);
}
