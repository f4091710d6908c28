#pragma once

#include <Eigen/Core>

namespace synthbody {

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Axis-angle (direction = axis, norm = angle in radians) to rotation matrix.
/// The zero vector maps to the identity.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa);

/// Inverse of rodrigues with the angle in [0, pi].
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation);

/// Geodesic angle between two rotations, in [0, pi].
double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

// SO(3) Jacobians. For R = rodrigues(v):
//   rodrigues(v + d) ~= rodrigues(left_jacobian(v) d) * R
//   rodrigues(v + d) ~= R * rodrigues(right_jacobian(v) d)
Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& v);
Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& v);
Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& v);
Eigen::Matrix3d right_jacobian_inverse(const Eigen::Vector3d& v);

/// Wraps the angle of an axis-angle vector into [0, 2*pi) keeping the rotation unchanged.
Eigen::Vector3d canonicalize_axis_angle(const Eigen::Vector3d& aa);

}  // namespace synthbody
