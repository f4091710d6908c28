#include "synthbody/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "synthbody/error.hpp"

namespace synthbody {

double mpjpe(const Keypoints& pred, const Keypoints& gt) {
  if (pred.cols() != gt.cols() || pred.cols() == 0) throw InvalidArgument("mpjpe needs equal, nonempty keypoint sets");
  return 1000.0 * (pred - gt).colwise().norm().mean();
}

AlignmentResult procrustes_align(const Keypoints& pred, const Keypoints& gt, bool with_scale) {
  if (pred.cols() != gt.cols()) throw InvalidArgument("procrustes needs equal keypoint counts");
  if (pred.cols() < 3) throw InvalidArgument("procrustes needs at least 3 points");
  const Eigen::Vector3d mu_p = pred.rowwise().mean();
  const Eigen::Vector3d mu_g = gt.rowwise().mean();
  const Keypoints p = pred.colwise() - mu_p;
  const Keypoints g = gt.colwise() - mu_g;

  Eigen::JacobiSVD<Eigen::Matrix3Xd> gt_svd(g, Eigen::ComputeThinU);
  const Eigen::Vector3d gs = gt_svd.singularValues();
  if (!(gs[1] > 1e-9 * std::max(gs[0], 1e-300))) {
    throw InvalidArgument("procrustes target is degenerate (collinear or coincident points)");
  }

  const Eigen::Matrix3d cov = g * p.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;

  AlignmentResult out;
  out.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  const double var_p = p.squaredNorm();
  out.scale = 1.0;
  if (with_scale) {
    if (!(var_p > 0.0)) throw InvalidArgument("procrustes source has zero spread");
    out.scale = svd.singularValues().dot(d) / var_p;
    if (!(out.scale > 0.0)) throw InvalidArgument("procrustes produced a non-positive scale");
  }
  out.translation = mu_g - out.scale * out.rotation * mu_p;
  out.aligned = (out.scale * out.rotation * pred).colwise() + out.translation;
  return out;
}

double pa_mpjpe(const Keypoints& pred, const Keypoints& gt, bool with_scale) {
  return mpjpe(procrustes_align(pred, gt, with_scale).aligned, gt);
}

std::vector<double> uniform_edges(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw InvalidArgument("uniform edges need bins >= 1 and hi > lo");
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * i / bins;
  edges.back() = hi;
  return edges;
}

BinReport bin_density_analysis(const std::string& factor, const std::vector<ErrorRecord>& records,
                               const std::vector<double>& edges) {
  if (records.empty()) throw InvalidArgument("bin analysis needs at least one record");
  if (edges.size() < 2) throw InvalidArgument("bin analysis needs at least two edges");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1])) throw InvalidArgument("bin edges must be strictly increasing");
  }
  const std::size_t nbins = edges.size() - 1;
  BinReport report;
  report.factor = factor;
  report.edges = edges;
  report.counts.assign(nbins, 0);
  std::vector<double> sums(nbins, 0.0);
  for (const ErrorRecord& r : records) {
    if (r.factor < edges.front() || r.factor > edges.back() || std::isnan(r.factor)) {
      ++report.outside;
      continue;
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), r.factor);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    bin = std::min(bin, nbins - 1);
    ++report.counts[bin];
    sums[bin] += r.error_mm;
  }
  report.mean_error.resize(nbins);
  report.defined.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    report.defined[b] = report.counts[b] > 0;
    report.mean_error[b] = report.defined[b] ? sums[b] / report.counts[b]
                                             : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace synthbody
