#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "synthbody/body_model.hpp"

namespace synthbody {

/// Mean Euclidean distance between corresponding keypoints, converted from meters to mm.
double mpjpe(const Keypoints& pred, const Keypoints& gt);

/// Similarity transform taking pred onto gt: aligned = scale * rotation * pred + translation.
struct AlignmentResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;
  Keypoints aligned;
};

/// Least-squares similarity (or rigid, with_scale = false) alignment via the SVD
/// of the centered cross-covariance, reflections excluded.
/// Throws InvalidArgument for fewer than 3 points or a collinear gt.
AlignmentResult procrustes_align(const Keypoints& pred, const Keypoints& gt, bool with_scale = true);

/// MPJPE after procrustes_align (mm).
double pa_mpjpe(const Keypoints& pred, const Keypoints& gt, bool with_scale = true);

struct ErrorRecord {
  double factor;
  double error_mm;
};

/// Density and mean error per factor bin. Bins are [edge_i, edge_{i+1}); the
/// last bin also includes its upper edge. Values outside all bins are counted
/// in `outside`.
struct BinReport {
  std::string factor;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::vector<double> mean_error;  // NaN where empty
  std::vector<bool> defined;       // false where the bin is empty
  std::size_t outside = 0;
};

BinReport bin_density_analysis(const std::string& factor, const std::vector<ErrorRecord>& records,
                               const std::vector<double>& edges);

/// n equal-width edges spanning [lo, hi].
std::vector<double> uniform_edges(double lo, double hi, int bins);

}  // namespace synthbody
