#include "synthbody/scene_occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "synthbody/error.hpp"

namespace synthbody {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

// Positive roots of |o + t d - c|^2 = r^2 appended to `roots`.
void sphere_roots(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& c,
                  double r, std::vector<double>& roots) {
  const Eigen::Vector3d oc = o - c;
  const double b = d.dot(oc);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - cc;
  if (disc < 0.0) return;
  const double s = std::sqrt(disc);
  roots.push_back(-b - s);
  roots.push_back(-b + s);
}

std::optional<double> nearest_positive(const std::vector<double>& roots) {
  std::optional<double> best;
  for (double t : roots) {
    if (t > 0.0 && (!best || t < *best)) best = t;
  }
  return best;
}

std::optional<double> intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Sphere& s) {
  std::vector<double> roots;
  sphere_roots(o, d, s.center, s.radius, roots);
  return nearest_positive(roots);
}

std::optional<double> intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Box& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < box.min[a] || o[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[a] - o[a]) / d[a];
    double t1 = (box.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > 0.0) return t_near;
  if (t_far > 0.0) return t_far;
  return std::nullopt;
}

std::optional<double> intersect_capsule(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Capsule& c) {
  std::vector<double> roots;
  sphere_roots(o, d, c.p0, c.radius, roots);
  sphere_roots(o, d, c.p1, c.radius, roots);
  // Lateral surface of the cylinder around the segment.
  const Eigen::Vector3d axis = (c.p1 - c.p0).normalized();
  const double length = (c.p1 - c.p0).norm();
  const Eigen::Vector3d op = o - c.p0;
  const Eigen::Vector3d d_perp = d - d.dot(axis) * axis;
  const Eigen::Vector3d o_perp = op - op.dot(axis) * axis;
  const double qa = d_perp.squaredNorm();
  if (qa > 0.0) {
    const double qb = d_perp.dot(o_perp);
    const double qc = o_perp.squaredNorm() - c.radius * c.radius;
    const double disc = qb * qb - qa * qc;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      for (double t : {(-qb - s) / qa, (-qb + s) / qa}) {
        const double along = (op + t * d).dot(axis);
        if (along >= 0.0 && along <= length) roots.push_back(t);
      }
    }
  }
  // Keep only roots on the outer boundary of the union.
  std::vector<double> surface;
  const double slack = 1e-9 * std::max(1.0, c.radius);
  for (double t : roots) {
    if (segment_distance(o + t * d, c.p0, c.p1) >= c.radius - slack) surface.push_back(t);
  }
  return nearest_positive(surface);
}

}  // namespace

Primitive::Primitive(Shape shape, Owner owner) : shape_(std::move(shape)), owner_(owner) {
  std::visit(Overloaded{
                 [](const Sphere& s) {
                   if (!s.center.allFinite() || !(s.radius > 0.0)) {
                     throw InvalidArgument("sphere needs a finite center and radius > 0");
                   }
                 },
                 [](const Box& b) {
                   if (!b.min.allFinite() || !b.max.allFinite() || !(b.min.array() < b.max.array()).all()) {
                     throw InvalidArgument("box needs min < max componentwise");
                   }
                 },
                 [](const Capsule& c) {
                   if (!c.p0.allFinite() || !c.p1.allFinite() || !(c.radius > 0.0)) {
                     throw InvalidArgument("capsule needs finite endpoints and radius > 0");
                   }
                   if (c.p0 == c.p1) throw InvalidArgument("capsule endpoints must differ");
                 },
             },
             shape_);
  if (owner_.kind == Owner::Kind::SubjectBone && owner_.bone < 0) {
    throw InvalidArgument("subject bone owner needs a bone index");
  }
}

double Primitive::signed_distance(const Eigen::Vector3d& p) const {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return (p - s.center).norm() - s.radius; },
                        [&](const Box& b) {
                          const Eigen::Vector3d center = 0.5 * (b.min + b.max);
                          const Eigen::Vector3d half = 0.5 * (b.max - b.min);
                          const Eigen::Vector3d q = (p - center).cwiseAbs() - half;
                          return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
                        },
                        [&](const Capsule& c) { return segment_distance(p, c.p0, c.p1) - c.radius; },
                    },
                    shape_);
}

std::string_view to_string(OcclusionLabel label) {
  switch (label) {
    case OcclusionLabel::Visible: return "visible";
    case OcclusionLabel::Occluded: return "occluded";
    case OcclusionLabel::SelfOccluded: return "self_occluded";
  }
  return "visible";
}

OcclusionLabel occlusion_label_from_string(std::string_view s) {
  if (s == "visible") return OcclusionLabel::Visible;
  if (s == "occluded") return OcclusionLabel::Occluded;
  if (s == "self_occluded") return OcclusionLabel::SelfOccluded;
  throw InvalidArgument("unknown occlusion label '" + std::string(s) + "'");
}

std::optional<double> intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                const Primitive& primitive) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return intersect_sphere(origin, dir, s); },
                        [&](const Box& b) { return intersect_box(origin, dir, b); },
                        [&](const Capsule& c) { return intersect_capsule(origin, dir, c); },
                    },
                    primitive.shape());
}

std::optional<RayHit> ray_cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               std::span<const Primitive> scene) {
  if (!origin.allFinite() || !dir.allFinite() || std::abs(dir.norm() - 1.0) > 1e-9) {
    throw InvalidArgument("ray direction must be a unit vector");
  }
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto t = intersect(origin, dir, scene[i]);
    if (t && (!best || *t < best->distance)) best = RayHit{i, *t};
  }
  return best;
}

double CapsuleRadii::radius(int bone) const {
  if (bone >= 0 && bone < static_cast<int>(per_bone.size()) && per_bone[bone] > 0.0) {
    return per_bone[bone];
  }
  return default_radius;
}

std::vector<Primitive> body_capsules(const Keypoints& joints, const KinematicTree& tree,
                                     const CapsuleRadii& radii) {
  if (joints.cols() < tree.joint_count()) throw InvalidArgument("fewer keypoints than tree joints");
  std::vector<Primitive> out;
  out.reserve(tree.joint_count() - 1);
  for (int j = 1; j < tree.joint_count(); ++j) {
    const Eigen::Vector3d a = joints.col(tree.parent(j));
    const Eigen::Vector3d b = joints.col(j);
    const double r = radii.radius(j);
    if (a == b) {
      out.emplace_back(Sphere{a, r}, Owner::subject_bone(j));
    } else {
      out.emplace_back(Capsule{a, b, r}, Owner::subject_bone(j));
    }
  }
  return out;
}

OcclusionLabel classify_joint(int joint, const Keypoints& keypoints, const Camera& cam,
                              std::span<const Primitive> environment,
                              std::span<const Primitive> capsules, const KinematicTree& tree) {
  if (joint < 0 || joint >= keypoints.cols()) throw InvalidArgument("keypoint index out of range");
  const Eigen::Vector3d target = keypoints.col(joint);
  if (!(world_to_cam(target, cam).z() > kMinDepth)) {
    throw InvalidArgument("keypoint " + std::to_string(joint) + " is behind the camera");
  }
  int anchor = joint;
  if (joint >= tree.joint_count()) {
    anchor = tree.find("head");
    if (anchor < 0) throw InvalidArgument("extra keypoints need a 'head' joint");
  }
  const Eigen::Vector3d origin = cam.position();
  const double range = (target - origin).norm();
  const Eigen::Vector3d dir = (target - origin) / range;
  const double cutoff = range - kHitTolerance;

  // The nearest hit decides; environment wins exact ties so the label does not
  // depend on primitive order.
  double nearest_env = std::numeric_limits<double>::infinity();
  for (const Primitive& p : environment) {
    if (const auto t = intersect(origin, dir, p); t && *t < nearest_env) nearest_env = *t;
  }
  double nearest_body = std::numeric_limits<double>::infinity();
  for (const Primitive& p : capsules) {
    const int bone = p.owner().bone;
    if (bone == anchor || (bone >= 0 && bone < tree.joint_count() && tree.parent(bone) == anchor)) continue;
    if (const auto t = intersect(origin, dir, p); t && *t < cutoff && *t < nearest_body) nearest_body = *t;
  }
  if (nearest_env < cutoff && nearest_env <= nearest_body) return OcclusionLabel::Occluded;
  if (nearest_body < cutoff) return OcclusionLabel::SelfOccluded;
  return OcclusionLabel::Visible;
}

}  // namespace synthbody
