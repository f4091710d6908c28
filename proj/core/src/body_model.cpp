#include "synthbody/body_model.hpp"

#include <cmath>
#include <utility>

#include "synthbody/error.hpp"
#include "synthbody/rotation.hpp"

namespace synthbody {
namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

void check_dims(const PoseParams& theta, const ShapeParams& beta, const KinematicTree& tree) {
  if (theta.joint_count() != tree.joint_count()) {
    throw InvalidArgument("pose has " + std::to_string(theta.joint_count()) +
                          " joints, tree has " + std::to_string(tree.joint_count()));
  }
  if (beta.dim() != tree.shape_dim()) {
    throw InvalidArgument("shape has " + std::to_string(beta.dim()) +
                          " coefficients, tree blend has " + std::to_string(tree.shape_dim()));
  }
}

}  // namespace

KinematicTree::KinematicTree(std::vector<int> parents, std::vector<Eigen::Vector3d> rest_offsets,
                             std::vector<ShapeBlend> shape_blend, std::vector<std::string> names)
    : parents_(std::move(parents)),
      rest_offsets_(std::move(rest_offsets)),
      shape_blend_(std::move(shape_blend)),
      names_(std::move(names)) {
  const std::size_t n = parents_.size();
  if (n == 0) throw InvalidArgument("kinematic tree needs at least one joint");
  if (rest_offsets_.size() != n || shape_blend_.size() != n || names_.size() != n) {
    throw InvalidArgument("kinematic tree arrays disagree on joint count");
  }
  if (parents_[0] != -1) throw InvalidArgument("joint 0 must be the root");
  shape_dim_ = static_cast<int>(shape_blend_[0].cols());
  children_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      if (parents_[i] < 0 || parents_[i] >= static_cast<int>(i)) {
        throw InvalidArgument("parent of joint " + std::to_string(i) +
                              " must precede it (exactly one root)");
      }
      if (!(rest_offsets_[i].norm() > 0.0)) {
        throw InvalidArgument("rest bone length of joint " + std::to_string(i) + " must be positive");
      }
      children_[parents_[i]].push_back(static_cast<int>(i));
    }
    if (!rest_offsets_[i].allFinite() || !shape_blend_[i].allFinite()) {
      throw InvalidArgument("kinematic tree contains non-finite values");
    }
    if (shape_blend_[i].cols() != shape_dim_) {
      throw InvalidArgument("shape blend width differs between joints");
    }
  }
}

int KinematicTree::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

KinematicTree KinematicTree::smpl_like() {
  // x: subject's left, y: up, z: forward.
  std::vector<std::string> names = {
      "pelvis",     "left_hip",       "right_hip",      "spine1",      "left_knee",
      "right_knee", "spine2",         "left_ankle",     "right_ankle", "spine3",
      "left_foot",  "right_foot",     "neck",           "left_collar", "right_collar",
      "head",       "left_shoulder",  "right_shoulder", "left_elbow",  "right_elbow",
      "left_wrist", "right_wrist",    "left_hand",      "right_hand"};
  std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                              9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  std::vector<Eigen::Vector3d> offsets = {
      {0.0, 0.93, 0.0},      {0.06, -0.09, 0.0},     {-0.06, -0.09, 0.0},
      {0.0, 0.11, -0.02},    {0.04, -0.38, 0.0},     {-0.04, -0.38, 0.0},
      {0.0, 0.13, 0.0},      {-0.01, -0.40, -0.04},  {0.01, -0.40, -0.04},
      {0.0, 0.05, 0.02},     {0.02, -0.05, 0.12},    {-0.02, -0.05, 0.12},
      {0.0, 0.22, -0.03},    {0.08, 0.12, -0.01},    {-0.08, 0.12, -0.01},
      {0.0, 0.09, 0.05},     {0.12, 0.04, -0.01},    {-0.12, 0.04, -0.01},
      {0.26, -0.01, -0.02},  {-0.26, -0.01, -0.02},  {0.25, 0.01, 0.0},
      {-0.25, 0.01, 0.0},    {0.08, -0.01, -0.01},   {-0.08, -0.01, -0.01}};

  auto in_leg = [](int j) { return j == 1 || j == 2 || (j >= 4 && j <= 11 && j != 6 && j != 9); };
  auto in_arm = [](int j) { return j >= 16; };
  auto in_torso = [](int j) { return j == 3 || j == 6 || j == 9 || j == 12 || j == 15; };

  std::vector<ShapeBlend> blend;
  blend.reserve(names.size());
  for (int j = 0; j < static_cast<int>(names.size()); ++j) {
    ShapeBlend b = ShapeBlend::Zero(3, kDefaultShapeDim);
    if (j > 0) {
      const Eigen::Vector3d& o = offsets[j];
      b.col(0) = 0.04 * o;                                   // stature
      b.col(1) = Eigen::Vector3d(0.05 * o.x(), 0.0, 0.0);    // width
      if (in_leg(j)) b.col(2) = 0.05 * o;                    // leg length
      if (in_arm(j)) b.col(3) = 0.05 * o;                    // arm length
      if (in_torso(j)) b.col(4) = 0.05 * o;                  // torso length
      for (int k = 5; k < kDefaultShapeDim; ++k) {
        for (int a = 0; a < 3; ++a) b(a, k) = 0.004 * std::sin(1.3 * j + 2.1 * k + 0.7 * a);
      }
    } else {
      b(1, 0) = 0.03;  // pelvis height follows stature
    }
    blend.push_back(std::move(b));
  }
  return KinematicTree(std::move(parents), std::move(offsets), std::move(blend), std::move(names));
}

PoseParams::PoseParams(Eigen::VectorXd theta) : theta_(std::move(theta)) {
  if (theta_.size() % 3 != 0) throw InvalidArgument("pose vector length must be a multiple of 3");
  require_finite(theta_, "pose");
  for (Eigen::Index j = 0; j < theta_.size() / 3; ++j) {
    theta_.segment<3>(3 * j) = canonicalize_axis_angle(theta_.segment<3>(3 * j));
  }
}

PoseParams PoseParams::zero(int joint_count) {
  return PoseParams(Eigen::VectorXd::Zero(3 * joint_count));
}

ShapeParams::ShapeParams(Eigen::VectorXd beta) : beta_(std::move(beta)) {
  require_finite(beta_, "shape");
  if (beta_.size() > 0 && beta_.cwiseAbs().maxCoeff() > kShapeBound) {
    throw InvalidArgument("shape coefficient exceeds bound of 5");
  }
}

ShapeParams ShapeParams::zero(int dim) { return ShapeParams(Eigen::VectorXd::Zero(dim)); }

Translation::Translation(const Eigen::Vector3d& t) : t_(t) {
  if (!t_.allFinite()) throw InvalidArgument("translation contains non-finite values");
}

Keypoints joint_regress(const ShapeParams& beta, const KinematicTree& tree) {
  if (beta.dim() != tree.shape_dim()) {
    throw InvalidArgument("shape has " + std::to_string(beta.dim()) +
                          " coefficients, tree blend has " + std::to_string(tree.shape_dim()));
  }
  const int n = tree.joint_count();
  Keypoints joints(3, n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3d offset = tree.rest_offset(j) + tree.shape_blend(j) * beta.vector();
    joints.col(j) = j == 0 ? offset : Eigen::Vector3d(joints.col(tree.parent(j)) + offset);
  }
  return joints;
}

PosedSkeleton pose_skeleton(const PoseParams& theta, const ShapeParams& beta,
                            const Translation& t, const KinematicTree& tree) {
  check_dims(theta, beta, tree);
  const int n = tree.joint_count();
  const Keypoints rest = joint_regress(beta, tree);
  PosedSkeleton out;
  out.global_rotations.resize(n);
  out.positions.resize(3, n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix3d local = rodrigues(theta.joint(j));
    const int p = tree.parent(j);
    if (p < 0) {
      out.global_rotations[j] = local;
      out.positions.col(j) = rest.col(j) + t.vector();
    } else {
      out.global_rotations[j] = out.global_rotations[p] * local;
      out.positions.col(j) =
          out.positions.col(p) + out.global_rotations[p] * (rest.col(j) - rest.col(p));
    }
  }
  return out;
}

Keypoints forward_kinematics(const PoseParams& theta, const ShapeParams& beta,
                             const Translation& t, const KinematicTree& tree) {
  return pose_skeleton(theta, beta, t, tree).positions;
}

Keypoints derive_extra_keypoints(const Keypoints& joints, const KinematicTree& tree) {
  const int head = tree.find("head");
  const int neck = tree.find("neck");
  if (head < 0 || neck < 0) throw InvalidArgument("tree needs joints named 'head' and 'neck'");
  if (joints.cols() != tree.joint_count()) {
    throw InvalidArgument("keypoint count does not match the tree");
  }
  const Eigen::Vector3d h = joints.col(head);
  const Eigen::Vector3d axis = h - joints.col(neck);
  Keypoints out(3, joints.cols() + 2);
  out.leftCols(joints.cols()) = joints;
  out.col(joints.cols()) = h + kHeadTopExtension * axis;
  out.col(joints.cols() + 1) = h + kNoseExtension * axis;
  return out;
}

}  // namespace synthbody
