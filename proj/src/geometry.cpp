#include "vtsdf/geometry.hpp"

#include <cmath>

namespace vtsdf {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& w) {
  Mat3 m;
  // clang-format off
  m <<     0, -w.z(),  w.y(),
       w.z(),      0, -w.x(),
      -w.y(),  w.x(),      0;
  // clang-format on
  return m;
}

Mat3 so3_exp(const Vec3& w) {
  double th = w.norm();
  if (th < kSmallAngle) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0) q.coeffs() *= -1.0;  // canonical hemisphere, angle in [0, pi)
  double s = q.vec().norm();
  double angle = 2.0 * std::atan2(s, q.w());
  if (s < kSmallAngle) {
    // atan2(s,w)/s -> 1/w - s^2/(3 w^3)
    return q.vec() * (2.0 / q.w()) * (1.0 - s * s / (3.0 * q.w() * q.w()));
  }
  return q.vec() * (angle / s);
}

Mat3 so3_left_jacobian(const Vec3& w) {
  double th = w.norm();
  Mat3 W = skew(w);
  if (th < 1e-5) return Mat3::Identity() + 0.5 * W + W * W / 6.0;
  double th2 = th * th;
  return Mat3::Identity() + (1.0 - std::cos(th)) / th2 * W +
         (th - std::sin(th)) / (th2 * th) * W * W;
}

Mat3 so3_left_jacobian_inv(const Vec3& w) {
  double th = w.norm();
  Mat3 W = skew(w);
  if (th < 1e-5) return Mat3::Identity() - 0.5 * W + W * W / 12.0;
  double coeff = 1.0 / (th * th) -
                 (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
  return Mat3::Identity() - 0.5 * W + coeff * W * W;
}

Pose se3_exp(const Twist& t) {
  double th = t.omega.norm();
  Pose p;
  if (th < kSmallAngle) {
    p.q = Quat(Eigen::AngleAxisd(th, th > 0 ? Vec3(t.omega / th) : Vec3::UnitX()));
  } else {
    p.q = Quat(Eigen::AngleAxisd(th, t.omega / th));
  }
  p.q.normalize();
  p.t = so3_left_jacobian(t.omega) * t.v;
  return p;
}

Twist se3_log(const Pose& p) {
  Quat q = p.q;
  if (q.w() < 0) q.coeffs() *= -1.0;
  double angle = 2.0 * std::atan2(q.vec().norm(), q.w());
  if (angle >= M_PI - 1e-6)
    throw AngleNearPi("se3_log: rotation angle " + std::to_string(angle) +
                      " within 1e-6 of pi");
  Twist t;
  t.omega = quat_log(q);
  t.v = so3_left_jacobian_inv(t.omega) * p.t;
  return t;
}

Mat6 adjoint(const Pose& p) {
  Mat3 R = p.rotation();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = R;
  ad.bottomRightCorner<3, 3>() = R;
  ad.bottomLeftCorner<3, 3>() = skew(p.t) * R;
  return ad;
}

Mat6 se3_ad(const Twist& t) {
  Mat6 m = Mat6::Zero();
  Mat3 W = skew(t.omega);
  m.topLeftCorner<3, 3>() = W;
  m.bottomRightCorner<3, 3>() = W;
  m.bottomLeftCorner<3, 3>() = skew(t.v);
  return m;
}

Mat6 se3_left_jacobian(const Twist& t) {
  // J = sum_n ad^n / (n+1)!; converges fast for |omega| < pi.
  Mat6 ad = se3_ad(t);
  Mat6 term = Mat6::Identity();
  Mat6 J = Mat6::Identity();  // n = 0 term
  double fact = 1.0;
  for (int n = 1; n <= 24; ++n) {
    term = term * ad;
    fact *= double(n + 1);
    J += term / fact;
    if (term.norm() / fact < 1e-16) break;
  }
  return J;
}

Mat6 se3_left_jacobian_inv(const Twist& t) {
  return se3_left_jacobian(t).inverse();
}

PointCloud transform_points(const Pose& p, const PointCloud& pts) {
  PointCloud out;
  out.frame = pts.frame;
  out.points.reserve(pts.points.size());
  for (const Vec3& x : pts.points) out.points.push_back(p * x);
  return out;
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  return quat_log(a.q.conjugate() * b.q).norm();
}

}  // namespace vtsdf
