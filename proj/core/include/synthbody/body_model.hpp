#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace synthbody {

/// Column j holds keypoint j (meters unless stated otherwise).
using Keypoints = Eigen::Matrix3Xd;
/// Per-joint linear shape correctives: 3 x shape_dim, meters per unit coefficient.
using ShapeBlend = Eigen::Matrix<double, 3, Eigen::Dynamic>;

inline constexpr int kDefaultShapeDim = 10;
inline constexpr double kShapeBound = 5.0;

/// Rooted joint hierarchy with rest offsets and shape correctives.
///
/// Joint 0 is the root; its rest offset is its absolute rest position. Every
/// other joint stores its offset from its parent. Parents are topologically
/// ordered (parent[i] < i).
class KinematicTree {
 public:
  KinematicTree(std::vector<int> parents, std::vector<Eigen::Vector3d> rest_offsets,
                std::vector<ShapeBlend> shape_blend, std::vector<std::string> names);

  /// 24-joint SMPL-style skeleton with 10 shape coefficients.
  static KinematicTree smpl_like();

  int joint_count() const { return static_cast<int>(parents_.size()); }
  int shape_dim() const { return shape_dim_; }
  /// parent(0) == -1.
  int parent(int joint) const { return parents_[joint]; }
  const std::vector<int>& parents() const { return parents_; }
  const Eigen::Vector3d& rest_offset(int joint) const { return rest_offsets_[joint]; }
  const std::vector<Eigen::Vector3d>& rest_offsets() const { return rest_offsets_; }
  const ShapeBlend& shape_blend(int joint) const { return shape_blend_[joint]; }
  const std::vector<ShapeBlend>& shape_blends() const { return shape_blend_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& children(int joint) const { return children_[joint]; }

  /// Index of a named joint, or -1.
  int find(std::string_view name) const;

 private:
  std::vector<int> parents_;
  std::vector<Eigen::Vector3d> rest_offsets_;
  std::vector<ShapeBlend> shape_blend_;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> children_;
  int shape_dim_ = 0;
};

/// Per-joint axis-angle rotations, flattened (3 * joint_count), radians.
/// Each joint's angle is wrapped into [0, 2*pi) on construction.
class PoseParams {
 public:
  PoseParams() = default;
  explicit PoseParams(Eigen::VectorXd theta);
  static PoseParams zero(int joint_count);

  int joint_count() const { return static_cast<int>(theta_.size() / 3); }
  Eigen::Vector3d joint(int j) const { return theta_.segment<3>(3 * j); }
  const Eigen::VectorXd& vector() const { return theta_; }

 private:
  Eigen::VectorXd theta_;
};

/// Shape coefficients, finite and bounded by kShapeBound in magnitude.
class ShapeParams {
 public:
  ShapeParams() = default;
  explicit ShapeParams(Eigen::VectorXd beta);
  static ShapeParams zero(int dim = kDefaultShapeDim);

  int dim() const { return static_cast<int>(beta_.size()); }
  const Eigen::VectorXd& vector() const { return beta_; }

 private:
  Eigen::VectorXd beta_;
};

/// World-frame root translation in meters.
class Translation {
 public:
  Translation() = default;
  explicit Translation(const Eigen::Vector3d& t);

  const Eigen::Vector3d& vector() const { return t_; }

 private:
  Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
};

/// Global joint rotations and positions from one forward-kinematics pass.
struct PosedSkeleton {
  std::vector<Eigen::Matrix3d> global_rotations;
  Keypoints positions;
};

/// Canonical (rest-pose) joint positions for shape coefficients beta.
Keypoints joint_regress(const ShapeParams& beta, const KinematicTree& tree);

/// World-frame joint positions of the posed, shaped, translated skeleton.
Keypoints forward_kinematics(const PoseParams& theta, const ShapeParams& beta,
                             const Translation& t, const KinematicTree& tree);

/// Same as forward_kinematics, also returning each joint's global rotation.
PosedSkeleton pose_skeleton(const PoseParams& theta, const ShapeParams& beta,
                            const Translation& t, const KinematicTree& tree);

// Interpolation weights for the appended keypoints, relative to the head-neck axis.
inline constexpr double kHeadTopExtension = 1.3;
inline constexpr double kNoseExtension = 0.4;

/// Appends head-top and nose (in that order) to the native joints.
/// head_top = head + 1.3 (head - neck); nose = head + 0.4 (head - neck).
Keypoints derive_extra_keypoints(const Keypoints& joints, const KinematicTree& tree);

}  // namespace synthbody
