#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "synthbody/body_model.hpp"
#include "synthbody/camera.hpp"

namespace synthbody {

struct Sphere {
  Eigen::Vector3d center;
  double radius;
};

struct Box {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
};

struct Capsule {
  Eigen::Vector3d p0;
  Eigen::Vector3d p1;
  double radius;
};

using Shape = std::variant<Sphere, Box, Capsule>;

/// Who a primitive belongs to: static scene geometry or one bone of the subject.
/// Bones are indexed by their child joint.
struct Owner {
  enum class Kind { Environment, SubjectBone };
  Kind kind = Kind::Environment;
  int bone = -1;

  static Owner environment() { return {Kind::Environment, -1}; }
  static Owner subject_bone(int bone) { return {Kind::SubjectBone, bone}; }
};

class Primitive {
 public:
  Primitive(Shape shape, Owner owner = Owner::environment());

  const Shape& shape() const { return shape_; }
  const Owner& owner() const { return owner_; }

  /// Signed distance from p to the primitive surface (negative inside).
  double signed_distance(const Eigen::Vector3d& p) const;

 private:
  Shape shape_;
  Owner owner_;
};

enum class OcclusionLabel { Visible, Occluded, SelfOccluded };

std::string_view to_string(OcclusionLabel label);
OcclusionLabel occlusion_label_from_string(std::string_view s);

struct RayHit {
  std::size_t index;  // into the primitive list given to ray_cast
  double distance;
};

/// Nearest strictly positive intersection of the ray with any primitive.
/// Throws InvalidArgument unless |dir| = 1 within 1e-9.
std::optional<RayHit> ray_cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               std::span<const Primitive> scene);

/// Nearest strictly positive intersection with a single primitive.
std::optional<double> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                const Primitive& primitive);

/// Capsule radius per bone (indexed by child joint); default_radius where unset.
struct CapsuleRadii {
  double default_radius = 0.05;
  std::vector<double> per_bone;

  double radius(int bone) const;
};

/// One capsule per parent-child bone of the native joints. Bones with
/// coincident endpoints become spheres of the same radius.
std::vector<Primitive> body_capsules(const Keypoints& joints, const KinematicTree& tree,
                                     const CapsuleRadii& radii = {});

/// Hits closer than this to the joint are ignored.
inline constexpr double kHitTolerance = 1e-3;

/// Visibility of keypoint `joint` as seen from the camera center. Keypoints
/// past the native joints (head-top, nose) are attached to the head. Capsules
/// of bones incident to the keypoint's joint are ignored.
/// Throws InvalidArgument if the keypoint is not in front of the camera.
OcclusionLabel classify_joint(int joint, const Keypoints& keypoints, const Camera& cam,
                              std::span<const Primitive> environment,
                              std::span<const Primitive> capsules, const KinematicTree& tree);

}  // namespace synthbody
