#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "vtsdf/errors.hpp"

namespace vtsdf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using Quat = Eigen::Quaterniond;

// se(3) tangent coordinates, ordered (omega, v).
struct Twist {
  Vec3 omega = Vec3::Zero();  // radians
  Vec3 v = Vec3::Zero();      // meters

  Vec6 vec() const {
    Vec6 x;
    x << omega, v;
    return x;
  }
  static Twist from_vec(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }
};

// Rigid transform: p_world = q * p_local + t. Unit quaternion + translation.
struct Pose {
  Quat q = Quat::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 operator*(const Vec3& p) const { return q * p + t; }

  Pose operator*(const Pose& o) const {
    Pose r{q * o.q, q * o.t + t};
    r.q.normalize();  // keep unit-norm invariant under long compose chains
    return r;
  }

  Pose inverse() const {
    Quat qi = q.conjugate();
    return {qi, qi * (-t)};
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  static Pose identity() { return {}; }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame;
};

Mat3 skew(const Vec3& w);

Mat3 so3_exp(const Vec3& w);
// Rotation-vector log of a unit quaternion; angle returned in [0, pi).
Vec3 quat_log(const Quat& q);

// Left Jacobian of SO(3) and its inverse (used by the SE(3) exp/log maps).
Mat3 so3_left_jacobian(const Vec3& w);
Mat3 so3_left_jacobian_inv(const Vec3& w);

Pose se3_exp(const Twist& t);
// Throws AngleNearPi when the rotation angle exceeds pi - 1e-6.
Twist se3_log(const Pose& p);

// Adjoint of a pose in (omega, v) ordering: [R 0; [t]x R  R].
Mat6 adjoint(const Pose& p);

// se(3) adjoint (ad) of a twist: [ [w]x 0; [v]x [w]x ].
Mat6 se3_ad(const Twist& t);

// Left Jacobian of SE(3) (series evaluation) and its inverse.
Mat6 se3_left_jacobian(const Twist& t);
Mat6 se3_left_jacobian_inv(const Twist& t);

PointCloud transform_points(const Pose& p, const PointCloud& pts);

// Angular distance between two poses' rotations, radians.
double rotation_angle_between(const Pose& a, const Pose& b);

}  // namespace vtsdf
