#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vtsdf/geometry.hpp"
#include "vtsdf/rng.hpp"

using namespace vtsdf;

namespace {

Twist random_twist(Rng& rng, double max_angle = 3.0) {
  // direction from normals, magnitude uniform; keeps angle < pi - margin
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-12) axis = Vec3::UnitX();
  axis.normalize();
  Twist t;
  t.omega = axis * rng.uniform(0.0, max_angle);
  t.v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return t;
}

}  // namespace

TEST_CASE("se3_exp: zero twist gives identity") {
  Pose p = se3_exp(Twist{});
  CHECK(p.q.isApprox(Quat::Identity()));
  CHECK(p.t.norm() == doctest::Approx(0.0));
}

TEST_CASE("se3_exp: quarter turn about z maps +x to +y") {
  Twist t;
  t.omega = Vec3(0, 0, M_PI / 2);
  Pose p = se3_exp(t);
  Vec3 y = p * Vec3(1, 0, 0);
  CHECK((y - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("se3_log: identity gives zero twist") {
  Twist t = se3_log(Pose::identity());
  CHECK(t.vec().norm() == doctest::Approx(0.0));
}

TEST_CASE("se3_log: pure translation") {
  Pose p;
  p.t = Vec3(0.1, 0, 0);
  Twist t = se3_log(p);
  CHECK(t.omega.norm() == doctest::Approx(0.0));
  CHECK((t.v - Vec3(0.1, 0, 0)).norm() < 1e-15);
}

TEST_CASE("exp/log round trip over 1000 seeded twists") {
  Rng rng(7);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    Twist t = random_twist(rng);
    Twist back = se3_log(se3_exp(t));
    worst = std::max(worst, (back.vec() - t.vec()).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("log/exp round trip over 1000 seeded poses") {
  Rng rng(11);
  double worst_rot = 0, worst_tr = 0;
  for (int i = 0; i < 1000; ++i) {
    Pose p = se3_exp(random_twist(rng));
    Pose back = se3_exp(se3_log(p));
    worst_rot = std::max(worst_rot, rotation_angle_between(p, back));
    worst_tr = std::max(worst_tr, (p.t - back.t).norm());
  }
  CHECK(worst_rot < 1e-9);
  CHECK(worst_tr < 1e-9);
}

TEST_CASE("se3_log raises near the pi singularity") {
  Twist t;
  t.omega = Vec3(0, 0, M_PI - 1e-9);
  Pose p = se3_exp(t);
  CHECK_THROWS_AS(se3_log(p), AngleNearPi);
}

TEST_CASE("small-angle branch continuous with main branch") {
  for (double eps : {1e-10, 1e-9, 1e-8, 1e-7}) {
    Twist t;
    t.omega = Vec3(eps, -eps, eps / 2);
    t.v = Vec3(0.3, -0.2, 0.1);
    Twist back = se3_log(se3_exp(t));
    CHECK((back.vec() - t.vec()).norm() < 1e-12);
  }
}

TEST_CASE("compose with inverse is identity") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Pose p = se3_exp(random_twist(rng));
    Pose e = p * p.inverse();
    CHECK(rotation_angle_between(e, Pose::identity()) < 1e-9);
    CHECK(e.t.norm() < 1e-9);
  }
}

TEST_CASE("transform_points is rigid") {
  Rng rng(5);
  PointCloud cloud;
  cloud.frame = "object";
  for (int i = 0; i < 50; ++i)
    cloud.points.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(-1, 1));

  SUBCASE("identity keeps the cloud") {
    PointCloud same = transform_points(Pose::identity(), cloud);
    for (size_t i = 0; i < cloud.points.size(); ++i)
      CHECK((same.points[i] - cloud.points[i]).norm() == doctest::Approx(0.0));
  }
  SUBCASE("pure translation moves the origin") {
    Pose p;
    p.t = Vec3(1, 2, 3);
    PointCloud one = transform_points(p, {{Vec3::Zero()}, "object"});
    CHECK((one.points[0] - Vec3(1, 2, 3)).norm() < 1e-15);
  }
  SUBCASE("pairwise distances preserved under random pose") {
    Pose p = se3_exp(random_twist(rng));
    PointCloud moved = transform_points(p, cloud);
    for (size_t i = 1; i < cloud.points.size(); ++i) {
      double before = (cloud.points[i] - cloud.points[i - 1]).norm();
      double after = (moved.points[i] - moved.points[i - 1]).norm();
      CHECK(std::abs(before - after) < 1e-9);
    }
  }
}

TEST_CASE("adjoint is a homomorphism") {
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    Pose a = se3_exp(random_twist(rng));
    Pose b = se3_exp(random_twist(rng));
    CHECK((adjoint(a * b) - adjoint(a) * adjoint(b)).norm() < 1e-9);
  }
}

TEST_CASE("se3 left Jacobian: J(0) = I and BCH first order") {
  CHECK((se3_left_jacobian(Twist{}) - Mat6::Identity()).norm() < 1e-14);

  // log(exp(eps) * exp(xi)) ~= xi + Jl_inv(xi) * eps
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    Twist xi = random_twist(rng, 2.5);
    Vec6 eps_v;
    for (int k = 0; k < 6; ++k) eps_v[k] = rng.uniform(-1, 1) * 1e-6;
    Twist eps = Twist::from_vec(eps_v);
    Vec6 lhs = se3_log(se3_exp(eps) * se3_exp(xi)).vec();
    Vec6 rhs = xi.vec() + se3_left_jacobian_inv(xi) * eps_v;
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}
