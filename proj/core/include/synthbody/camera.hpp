#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "synthbody/body_model.hpp"

namespace synthbody {

/// Pixel intrinsics and image size.
struct Intrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 960.0;
  double cy = 540.0;
  int width = 1920;
  int height = 1080;
};

/// Pinhole camera. Camera frame: x right, y down, z along the optical axis.
class Camera {
 public:
  /// rotation maps world directions into the camera frame; position is the camera center.
  Camera(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& position, const Intrinsics& intrinsics);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& position() const { return position_; }
  const Intrinsics& intrinsics() const { return intrinsics_; }

  /// 3x3 calibration matrix K.
  Eigen::Matrix3d calibration() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d position_;
  Intrinsics intrinsics_;
};

/// Points with camera-frame depth at or below this are treated as behind the camera.
inline constexpr double kMinDepth = 1e-6;

/// Weighted piecewise-uniform distribution over one scalar.
/// A bin with equal edges is a point mass.
struct Histogram1D {
  std::vector<double> edges;    // n + 1, nondecreasing
  std::vector<double> weights;  // n, nonnegative, positive sum

  static Histogram1D uniform(double lo, double hi) { return {{lo, hi}, {1.0}}; }
  static Histogram1D point(double value) { return {{value, value}, {1.0}}; }

  void validate(const char* name) const;
  double sample(double u_bin, double u_within) const;
};

/// Camera placement distribution around the subject. Angles are radians in memory.
struct CameraDistribution {
  Histogram1D yaw = Histogram1D::uniform(0.0, 2.0 * 3.14159265358979323846);
  Histogram1D elevation = Histogram1D::uniform(-30.0 * 3.14159265358979323846 / 180.0,
                                               60.0 * 3.14159265358979323846 / 180.0);
  Histogram1D distance = Histogram1D::uniform(2.0, 6.0);
  /// Vertical offset of the look-at point above the subject root.
  Histogram1D height = Histogram1D::point(0.0);
  Intrinsics intrinsics;

  void validate() const;
};

/// Spherical placement of a camera relative to the look-at point.
struct CameraPlacement {
  double yaw = 0.0;
  double elevation = 0.0;
  double distance = 0.0;
  double height = 0.0;
};

/// Camera-frame coordinates of a world point: R (x - position).
Eigen::Vector3d world_to_cam(const Eigen::Vector3d& x, const Camera& cam);

struct Projection {
  Eigen::Matrix2Xd pixels;  // NaN for points behind the camera
  std::vector<bool> in_frame;
  std::vector<bool> in_front;
};

Projection project(const Keypoints& points, const Camera& cam);

/// Camera at `eye` looking at `target` with world +y as up.
Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Intrinsics& intrinsics);

CameraPlacement sample_placement(const CameraDistribution& dist, std::uint64_t seed);

/// Camera orbiting `subject_root` at the given placement, aimed at root + height * up.
Camera place_camera(const CameraPlacement& placement, const Eigen::Vector3d& subject_root,
                    const Intrinsics& intrinsics);

Camera sample_camera(const CameraDistribution& dist, const Eigen::Vector3d& subject_root,
                     std::uint64_t seed);

}  // namespace synthbody
