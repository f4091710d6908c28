#include "synthbody/rotation.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

namespace synthbody {
namespace {

constexpr double kSmallAngle = 1e-6;

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa) {
  const double theta2 = aa.squaredNorm();
  const Eigen::Matrix3d k = skew(aa);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta2 < kSmallAngle * kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa{Eigen::Quaterniond(rotation).normalized()};
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  return angle * axis;
}

double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return rotation_log(a.transpose() * b).norm();
}

Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& v) {
  const double theta2 = v.squaredNorm();
  const Eigen::Matrix3d k = skew(v);
  double b;  // (1 - cos) / theta^2
  double c;  // (theta - sin) / theta^3
  if (theta2 < kSmallAngle * kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Eigen::Matrix3d::Identity() + b * k + c * k * k;
}

Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& v) { return left_jacobian(-v); }

Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& v) {
  const double theta2 = v.squaredNorm();
  const Eigen::Matrix3d k = skew(v);
  double c;
  if (theta2 < kSmallAngle * kSmallAngle) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double theta = std::sqrt(theta2);
    c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Eigen::Matrix3d::Identity() - 0.5 * k + c * k * k;
}

Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& v) { return left_jacobian_inverse(-v); }

Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& aa) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double theta = aa.norm();
  if (theta < kTwoPi) return aa;
  const double wrapped = std::fmod(theta, kTwoPi);
  return aa * (wrapped / theta);
}

}  // namespace synthbody
