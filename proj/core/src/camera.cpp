#include "synthbody/camera.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numeric>

#include "synthbody/error.hpp"
#include "synthbody/random.hpp"

namespace synthbody {

Camera::Camera(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& position,
               const Intrinsics& intrinsics)
    : rotation_(rotation), position_(position), intrinsics_(intrinsics) {
  const double orth = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).norm();
  if (!rotation_.allFinite() || orth > 1e-6 || rotation_.determinant() < 0.0) {
    throw InvalidArgument("camera rotation must be a proper rotation");
  }
  if (!position_.allFinite()) throw InvalidArgument("camera position must be finite");
  const Intrinsics& k = intrinsics_;
  if (!(k.fx > 0.0 && k.fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (!(k.cx > 0.0 && k.cx < k.width && k.cy > 0.0 && k.cy < k.height)) {
    throw InvalidArgument("principal point must lie inside the image");
  }
}

Eigen::Matrix3d Camera::calibration() const {
  Eigen::Matrix3d k;
  k << intrinsics_.fx, 0.0, intrinsics_.cx,
       0.0, intrinsics_.fy, intrinsics_.cy,
       0.0, 0.0, 1.0;
  return k;
}

void Histogram1D::validate(const char* name) const {
  const std::string what(name);
  if (weights.empty() || edges.size() != weights.size() + 1) {
    throw InvalidArgument(what + ": histogram needs n >= 1 weights and n + 1 edges");
  }
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!std::isfinite(edges[i]) || !std::isfinite(edges[i + 1]) || edges[i + 1] < edges[i]) {
      throw InvalidArgument(what + ": histogram edges must be finite and nondecreasing");
    }
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument(what + ": weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument(what + ": weights must have a positive sum");
}

double Histogram1D::sample(double u_bin, double u_within) const {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = u_bin * total;
  double acc = 0.0;
  std::size_t bin = weights.size() - 1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc && weights[i] > 0.0) {
      bin = i;
      break;
    }
  }
  while (weights[bin] <= 0.0 && bin > 0) --bin;
  return edges[bin] + u_within * (edges[bin + 1] - edges[bin]);
}

void CameraDistribution::validate() const {
  yaw.validate("yaw");
  elevation.validate("elevation");
  distance.validate("distance");
  height.validate("height");
  if (!(distance.edges.front() > 0.0)) throw InvalidArgument("distance must be positive");
  constexpr double kLimit = 89.0 * 3.14159265358979323846 / 180.0;
  if (elevation.edges.front() < -kLimit || elevation.edges.back() > kLimit) {
    throw InvalidArgument("elevation must stay within (-89, 89) degrees");
  }
  // Throws on invalid intrinsics.
  Camera(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), intrinsics);
}

Eigen::Vector3d world_to_cam(const Eigen::Vector3d& x, const Camera& cam) {
  return cam.rotation() * (x - cam.position());
}

Projection project(const Keypoints& points, const Camera& cam) {
  const Intrinsics& k = cam.intrinsics();
  const auto n = points.cols();
  Projection out;
  out.pixels.resize(2, n);
  out.in_frame.assign(n, false);
  out.in_front.assign(n, false);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Vector3d pc = world_to_cam(points.col(j), cam);
    if (!(pc.z() > kMinDepth)) {
      out.pixels.col(j).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double u = k.cx + k.fx * pc.x() / pc.z();
    const double v = k.cy + k.fy * pc.y() / pc.z();
    out.pixels.col(j) << u, v;
    out.in_front[j] = true;
    out.in_frame[j] = u >= 0.0 && u < k.width && v >= 0.0 && v < k.height;
  }
  return out;
}

Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Intrinsics& intrinsics) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitY());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();  // looking straight up/down
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return Camera(r, eye, intrinsics);
}

CameraPlacement sample_placement(const CameraDistribution& dist, std::uint64_t seed) {
  dist.validate();
  Rng rng(seed);
  CameraPlacement p;
  // Two draws per histogram, in a fixed order.
  auto draw = [&rng](const Histogram1D& h) {
    const double u_bin = uniform01(rng);
    const double u_within = uniform01(rng);
    return h.sample(u_bin, u_within);
  };
  p.yaw = draw(dist.yaw);
  p.elevation = draw(dist.elevation);
  p.distance = draw(dist.distance);
  p.height = draw(dist.height);
  return p;
}

Camera place_camera(const CameraPlacement& placement, const Eigen::Vector3d& subject_root,
                    const Intrinsics& intrinsics) {
  const Eigen::Vector3d target = subject_root + Eigen::Vector3d(0.0, placement.height, 0.0);
  const double ce = std::cos(placement.elevation);
  const Eigen::Vector3d dir(std::sin(placement.yaw) * ce, std::sin(placement.elevation),
                            -std::cos(placement.yaw) * ce);
  return look_at(target + placement.distance * dir, target, intrinsics);
}

Camera sample_camera(const CameraDistribution& dist, const Eigen::Vector3d& subject_root,
                     std::uint64_t seed) {
  return place_camera(sample_placement(dist, seed), subject_root, dist.intrinsics);
}

}  // namespace synthbody
