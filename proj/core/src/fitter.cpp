#include "synthbody/fitter.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "synthbody/error.hpp"
#include "synthbody/rotation.hpp"

namespace synthbody {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMinUsableJoints = 4;

using Triplet = Eigen::Triplet<double>;
using SparseMatrix = Eigen::SparseMatrix<double>;

int count_usable(const JointMask& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

void check_mask(Eigen::Index cols_pred, Eigen::Index cols_target, const JointMask& mask) {
  if (cols_pred != cols_target || static_cast<Eigen::Index>(mask.size()) != cols_pred) {
    throw InvalidArgument("prediction, target and mask sizes differ");
  }
  if (count_usable(mask) == 0) throw InvalidArgument("mask selects no joints");
}

/// Forward kinematics of one frame with everything needed for its Jacobian.
struct FrameKinematics {
  Keypoints positions;
  std::vector<Eigen::Matrix3d> global;
  // lever[i] = G_parent(i) * J_l(theta_i): maps a change of theta_i to a
  // rotation increment of joint i's subtree, expressed in the world frame.
  std::vector<Eigen::Matrix3d> lever;
  // shape_jac[k] = d position_k / d beta.
  std::vector<Eigen::MatrixXd> shape_jac;
};

void frame_kinematics(const Eigen::VectorXd& theta, const Eigen::Vector3d& translation,
                      const Keypoints& rest, const KinematicTree& tree, bool with_jacobian,
                      FrameKinematics& out) {
  const int n = tree.joint_count();
  out.positions.resize(3, n);
  out.global.resize(n);
  if (with_jacobian) {
    out.lever.resize(n);
    out.shape_jac.resize(n);
  }
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3d v = theta.segment<3>(3 * j);
    const Eigen::Matrix3d local = rodrigues(v);
    const int p = tree.parent(j);
    const Eigen::Matrix3d parent_rot = p < 0 ? Eigen::Matrix3d::Identity() : out.global[p];
    out.global[j] = parent_rot * local;
    if (p < 0) {
      out.positions.col(j) = rest.col(j) + translation;
    } else {
      out.positions.col(j) = out.positions.col(p) + parent_rot * (rest.col(j) - rest.col(p));
    }
    if (with_jacobian) {
      out.lever[j] = parent_rot * left_jacobian(v);
      out.shape_jac[j] = parent_rot * tree.shape_blend(j);
      if (p >= 0) out.shape_jac[j] += out.shape_jac[p];
    }
  }
}

std::vector<std::vector<int>> strict_ancestors(const KinematicTree& tree) {
  std::vector<std::vector<int>> out(tree.joint_count());
  for (int k = 0; k < tree.joint_count(); ++k) {
    for (int a = tree.parent(k); a >= 0; a = tree.parent(a)) out[k].push_back(a);
  }
  return out;
}

/// Rotation with the smallest angle taking direction a onto direction b.
Eigen::Matrix3d minimal_rotation(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d an = a.normalized();
  const Eigen::Vector3d bn = b.normalized();
  const Eigen::Vector3d axis = an.cross(bn);
  const double s = axis.norm();
  const double c = an.dot(bn);
  if (s < 1e-12) {
    if (c > 0.0) return Eigen::Matrix3d::Identity();
    Eigen::Vector3d perp = an.cross(Eigen::Vector3d::UnitX());
    if (perp.norm() < 1e-6) perp = an.cross(Eigen::Vector3d::UnitY());
    return rodrigues(kPi * perp.normalized());
  }
  return rodrigues(std::atan2(s, c) * axis / s);
}

/// Closed-form hierarchical initialization: each joint is rotated so that its
/// rest-pose child offsets point at the target child keypoints.
void initial_pose(const Keypoints& target, const JointMask& mask, const Keypoints& rest,
                  const KinematicTree& tree, Eigen::VectorXd& theta, Eigen::Vector3d& translation) {
  const int n = tree.joint_count();
  theta = Eigen::VectorXd::Zero(3 * n);
  std::vector<Eigen::Matrix3d> global(n);
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent(i);
    const Eigen::Matrix3d parent_rot = p < 0 ? Eigen::Matrix3d::Identity() : global[p];
    Eigen::Matrix3d local = Eigen::Matrix3d::Identity();
    if (mask[i]) {
      std::vector<Eigen::Vector3d> from, to;
      for (int c : tree.children(i)) {
        if (!mask[c]) continue;
        from.push_back(parent_rot * (rest.col(c) - rest.col(i)));
        to.push_back(target.col(c) - target.col(i));
      }
      Eigen::Matrix3d world_fix = Eigen::Matrix3d::Identity();
      if (from.size() == 1) {
        world_fix = minimal_rotation(from[0], to[0]);
      } else if (from.size() > 1) {
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (std::size_t c = 0; c < from.size(); ++c) cov += to[c] * from[c].transpose();
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Vector3d d(1.0, 1.0, (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0);
        world_fix = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
      }
      local = parent_rot.transpose() * world_fix * parent_rot;
    }
    theta.segment<3>(3 * i) = rotation_log(local);
    global[i] = parent_rot * rodrigues(theta.segment<3>(3 * i));
  }
  if (mask[0]) {
    translation = target.col(0) - rest.col(0);
  } else {
    // Root hidden: place it so the usable joints' centroid matches.
    FrameKinematics fk;
    frame_kinematics(theta, Eigen::Vector3d::Zero(), rest, tree, false, fk);
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    int m = 0;
    for (int k = 0; k < n; ++k) {
      if (!mask[k]) continue;
      acc += target.col(k) - fk.positions.col(k);
      ++m;
    }
    translation = acc / std::max(m, 1);
  }
}

/// Shape whose rest bone lengths best match the mean target bone lengths.
/// A few Gauss-Newton steps on a 10-dimensional problem; the ridge keeps
/// directions that bone lengths cannot see at zero.
Eigen::VectorXd initial_shape(const FitTargets& targets, const KinematicTree& tree) {
  const int n = tree.joint_count();
  const int s = tree.shape_dim();
  Eigen::VectorXd mean_length = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi seen = Eigen::VectorXi::Zero(n);
  for (int f = 0; f < targets.frame_count(); ++f) {
    const JointMask& mask = targets.masks[f];
    for (int j = 1; j < n; ++j) {
      const int p = tree.parent(j);
      if (!mask[j] || !mask[p]) continue;
      mean_length[j] += (targets.keypoints[f].col(j) - targets.keypoints[f].col(p)).norm();
      ++seen[j];
    }
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(s);
  if (s == 0) return beta;
  constexpr double kRidge = 1e-4;
  for (int iter = 0; iter < 8; ++iter) {
    Eigen::MatrixXd h = kRidge * Eigen::MatrixXd::Identity(s, s);
    Eigen::VectorXd g = kRidge * beta;
    for (int j = 1; j < n; ++j) {
      if (seen[j] == 0) continue;
      const Eigen::Vector3d bone = tree.rest_offset(j) + tree.shape_blend(j) * beta;
      const double len = bone.norm();
      if (len < 1e-9) continue;
      const Eigen::RowVectorXd row = (bone / len).transpose() * tree.shape_blend(j);
      const double r = len - mean_length[j] / seen[j];
      h += row.transpose() * row;
      g += row.transpose() * r;
    }
    const Eigen::VectorXd delta = h.ldlt().solve(-g);
    beta = (beta + delta).cwiseMax(-kShapeBound).cwiseMin(kShapeBound);
    if (delta.norm() < 1e-10) break;
  }
  return beta;
}

/// Wraps pose angles into [0, pi] and clamps shape coefficients to the bound.
void retract(Eigen::VectorXd& x, int shape_dim, int shape_offset, int pose_begin, int frame_stride,
             int frame_count, int joint_count) {
  for (int k = 0; k < shape_dim; ++k) {
    x[shape_offset + k] = std::clamp(x[shape_offset + k], -kShapeBound, kShapeBound);
  }
  for (int f = 0; f < frame_count; ++f) {
    for (int j = 0; j < joint_count; ++j) {
      auto v = x.segment<3>(pose_begin + f * frame_stride + 3 * j);
      const double angle = v.norm();
      if (angle > kPi) v *= (angle - 2.0 * kPi) / angle;
    }
  }
}

struct LmOutcome {
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  std::vector<double> history;
};

/// Levenberg-Marquardt on a least-squares problem exposing
///   double linearize(x)           -> cost, caches normal equations
///   double cost(x)
///   bool solve(lambda, step, predicted) -> (H + lambda D) step = -g, and the
///                                    decrease predicted by the linear model
///   double max_diagonal()
///   void retract(x)
/// Damping follows the gain ratio (Nielsen's rule).
template <class Problem>
LmOutcome levenberg_marquardt(Problem& problem, Eigen::VectorXd& x, int max_iterations,
                              const FitConfig& config, bool record_history) {
  LmOutcome out;
  out.cost = problem.linearize(x);
  double lambda = config.initial_damping * std::max(problem.max_diagonal(), 1e-12);
  double nu = config.damping_increase;
  Eigen::VectorXd step;
  while (out.iterations < max_iterations) {
    if (out.cost == 0.0) {
      out.converged = true;
      break;
    }
    ++out.iterations;
    double predicted = 0.0;
    if (!problem.solve(lambda, step, predicted)) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }
    if (!(predicted > 0.0)) {
      // Stationary up to rounding.
      out.converged = true;
      break;
    }
    Eigen::VectorXd candidate = x + step;
    problem.retract(candidate);
    const double c = problem.cost(candidate);
    if (c < out.cost) {
      const double decrease = out.cost - c;
      const double rho = decrease / predicted;
      x = std::move(candidate);
      out.cost = c;
      if (record_history) out.history.push_back(c);
      const double shrink = 1.0 - std::pow(2.0 * std::min(rho, 1.0) - 1.0, 3);
      lambda = std::max(lambda * std::max(config.damping_decrease, shrink), 1e-300);
      nu = config.damping_increase;
      if (decrease < config.tolerance) {
        out.converged = true;
        break;
      }
      problem.linearize(x);
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e16 * std::max(problem.max_diagonal(), 1e-12)) {
        // No descent direction left at working precision.
        out.converged = true;
        break;
      }
    }
  }
  return out;
}

/// Pose and translation of a single frame with the shape held fixed; data term only.
class FrameProblem {
 public:
  FrameProblem(const Keypoints& target, const JointMask& mask, const Keypoints& rest,
               const KinematicTree& tree, const std::vector<std::vector<int>>& ancestors, double weight)
      : target_(target), mask_(mask), rest_(rest), tree_(tree), ancestors_(ancestors), weight_(weight) {}

  int size() const { return 3 * tree_.joint_count() + 3; }

  double cost(const Eigen::VectorXd& x) {
    frame_kinematics(x.head(3 * tree_.joint_count()), x.tail<3>(), rest_, tree_, false, fk_);
    return weight_ * data_sum();
  }

  double linearize(const Eigen::VectorXd& x) {
    const int n = tree_.joint_count();
    frame_kinematics(x.head(3 * n), x.tail<3>(), rest_, tree_, true, fk_);
    const int m = count_usable(mask_);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * m, size());
    Eigen::VectorXd r(3 * m);
    int row = 0;
    for (int k = 0; k < n; ++k) {
      if (!mask_[k]) continue;
      r.segment<3>(row) = fk_.positions.col(k) - target_.col(k);
      for (int a : ancestors_[k]) {
        jac.block<3, 3>(row, 3 * a) = -skew(fk_.positions.col(k) - fk_.positions.col(a)) * fk_.lever[a];
      }
      jac.block<3, 3>(row, 3 * n).setIdentity();
      row += 3;
    }
    hessian_.noalias() = weight_ * jac.transpose() * jac;
    gradient_.noalias() = weight_ * jac.transpose() * r;
    return weight_ * r.squaredNorm();
  }

  double max_diagonal() const { return hessian_.diagonal().maxCoeff(); }

  bool solve(double lambda, Eigen::VectorXd& step, double& predicted) {
    Eigen::MatrixXd a = hessian_;
    const double floor = 1e-9 * std::max(max_diagonal(), 1e-12);
    Eigen::VectorXd damping(a.rows());
    for (int i = 0; i < a.rows(); ++i) {
      damping[i] = lambda * std::max(hessian_(i, i), floor);
      a(i, i) += damping[i];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return false;
    step = ldlt.solve(-gradient_);
    predicted = -gradient_.dot(step) + step.dot(damping.cwiseProduct(step));
    return step.allFinite();
  }

  void retract(Eigen::VectorXd& x) const {
    synthbody::retract(x, 0, 0, 0, 0, 1, tree_.joint_count());
  }

 private:
  double data_sum() const {
    double s = 0.0;
    for (int k = 0; k < tree_.joint_count(); ++k) {
      if (mask_[k]) s += (fk_.positions.col(k) - target_.col(k)).squaredNorm();
    }
    return s;
  }

  const Keypoints& target_;
  const JointMask& mask_;
  const Keypoints& rest_;
  const KinematicTree& tree_;
  const std::vector<std::vector<int>>& ancestors_;
  double weight_;
  FrameKinematics fk_;
  Eigen::MatrixXd hessian_;
  Eigen::VectorXd gradient_;
};

/// Full objective over shape and every frame's pose and translation.
class SequenceProblem {
 public:
  SequenceProblem(const FitTargets& targets, const KinematicTree& tree, const FitConfig& config)
      : targets_(targets), tree_(tree), config_(config), ancestors_(strict_ancestors(tree)) {}

  int shape_dim() const { return tree_.shape_dim(); }
  int stride() const { return 3 * tree_.joint_count() + 3; }
  int frames() const { return targets_.frame_count(); }
  int size() const { return shape_dim() + frames() * stride(); }

  double cost(const Eigen::VectorXd& x) { return evaluate(x, false); }

  double linearize(const Eigen::VectorXd& x) {
    const double c = evaluate(x, true);
    SparseMatrix jac(rows_, size());
    jac.setFromTriplets(triplets_.begin(), triplets_.end());
    const SparseMatrix jt = jac.transpose();
    // Unobservable columns (e.g. leaf joints without smoothing) still need a
    // structural diagonal entry for the damping.
    if (structural_diagonal_.rows() != size()) {
      structural_diagonal_.resize(size(), size());
      structural_diagonal_.setIdentity();
      structural_diagonal_ *= 0.0;
    }
    hessian_ = jt * jac + structural_diagonal_;
    gradient_ = jt * residual_;
    diagonal_ = hessian_.diagonal();
    return c;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) {
    linearize(x);
    return 2.0 * to_external(gradient_);
  }

  double max_diagonal() const { return diagonal_.size() ? diagonal_.maxCoeff() : 0.0; }

  bool solve(double lambda, Eigen::VectorXd& step, double& predicted) {
    const double floor = 1e-9 * std::max(max_diagonal(), 1e-12);
    SparseMatrix a = hessian_;
    Eigen::VectorXd damping(size());
    for (int i = 0; i < size(); ++i) {
      damping[i] = lambda * std::max(diagonal_[i], floor);
      a.coeffRef(i, i) += damping[i];
    }
    // The sparsity pattern only depends on the masks, so it is analysed once.
    // Columns are ordered frame by frame with the shape last, which keeps the
    // fill inside the band of neighbouring frames.
    if (!analysed_) {
      solver_.analyzePattern(a);
      analysed_ = true;
    }
    solver_.factorize(a);
    if (solver_.info() != Eigen::Success) return false;
    const Eigen::VectorXd internal = solver_.solve(-gradient_);
    if (solver_.info() != Eigen::Success) return false;
    predicted = -gradient_.dot(internal) + internal.dot(damping.cwiseProduct(internal));
    step = to_external(internal);
    return step.allFinite();
  }

  void retract(Eigen::VectorXd& x) const {
    synthbody::retract(x, shape_dim(), 0, shape_dim(), stride(), frames(), tree_.joint_count());
  }

 private:
  // Internal column of an external state index: [frames...][shape].
  int column(int external) const {
    return external < shape_dim() ? frames() * stride() + external : external - shape_dim();
  }

  Eigen::VectorXd to_external(const Eigen::VectorXd& internal) const {
    Eigen::VectorXd out(size());
    out.head(shape_dim()) = internal.tail(shape_dim());
    out.tail(size() - shape_dim()) = internal.head(size() - shape_dim());
    return out;
  }

  // Residuals are scaled by sqrt(weight) so that cost = ||r||^2.
  double evaluate(const Eigen::VectorXd& x, bool with_jacobian) {
    const int n = tree_.joint_count();
    const int s = shape_dim();
    const int t_count = frames();
    const Eigen::VectorXd beta = x.head(s);
    Keypoints rest(3, n);
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d offset = tree_.rest_offset(j) + tree_.shape_blend(j) * beta;
      rest.col(j) = j == 0 ? offset : Eigen::Vector3d(rest.col(tree_.parent(j)) + offset);
    }
    const double w_data = std::sqrt(config_.lambda_data);
    const double w_smooth = std::sqrt(config_.lambda_smooth);
    const double w_shape = std::sqrt(config_.lambda_shape);

    std::vector<double> res;
    if (with_jacobian) {
      triplets_.clear();
      res.reserve(static_cast<std::size_t>(t_count) * n * 6 + s);
    }
    double total = 0.0;
    int row = 0;
    auto push_block = [&](int r0, int c0, const Eigen::Matrix3d& m) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) triplets_.emplace_back(r0 + a, column(c0 + b), m(a, b));
    };

    for (int f = 0; f < t_count; ++f) {
      const int base = s + f * stride();
      frame_kinematics(x.segment(base, 3 * n), x.segment<3>(base + 3 * n), rest, tree_, with_jacobian, fk_);
      const Keypoints& target = targets_.keypoints[f];
      const JointMask& mask = targets_.masks[f];
      for (int k = 0; k < n; ++k) {
        if (!mask[k]) continue;
        const Eigen::Vector3d r = w_data * (fk_.positions.col(k) - target.col(k));
        total += r.squaredNorm();
        if (!with_jacobian) continue;
        for (int a = 0; a < 3; ++a) res.push_back(r[a]);
        for (int anc : ancestors_[k]) {
          push_block(row, base + 3 * anc,
                     -w_data * skew(fk_.positions.col(k) - fk_.positions.col(anc)) * fk_.lever[anc]);
        }
        push_block(row, base + 3 * n, w_data * Eigen::Matrix3d::Identity());
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < s; ++b) triplets_.emplace_back(row + a, column(b), w_data * fk_.shape_jac[k](a, b));
        row += 3;
      }
    }

    if (config_.lambda_smooth > 0.0) {
      for (int f = 1; f < t_count; ++f) {
        const int prev = s + (f - 1) * stride();
        const int cur = s + f * stride();
        for (int j = 0; j < n; ++j) {
          const Eigen::Vector3d v0 = x.segment<3>(prev + 3 * j);
          const Eigen::Vector3d v1 = x.segment<3>(cur + 3 * j);
          const Eigen::Vector3d log_rel = rotation_log(rodrigues(v0).transpose() * rodrigues(v1));
          const Eigen::Vector3d r = w_smooth * log_rel;
          total += r.squaredNorm();
          if (!with_jacobian) continue;
          for (int a = 0; a < 3; ++a) res.push_back(r[a]);
          push_block(row, cur + 3 * j, w_smooth * right_jacobian_inverse(log_rel) * right_jacobian(v1));
          push_block(row, prev + 3 * j, -w_smooth * left_jacobian_inverse(log_rel) * right_jacobian(v0));
          row += 3;
        }
      }
    }

    if (config_.lambda_shape > 0.0) {
      for (int b = 0; b < s; ++b) {
        const double r = w_shape * beta[b];
        total += r * r;
        if (!with_jacobian) continue;
        res.push_back(r);
        triplets_.emplace_back(row, column(b), w_shape);
        ++row;
      }
    }
    if (with_jacobian) {
      rows_ = row;
      residual_ = Eigen::Map<const Eigen::VectorXd>(res.data(), static_cast<Eigen::Index>(res.size()));
    }
    return total;
  }

  const FitTargets& targets_;
  const KinematicTree& tree_;
  const FitConfig& config_;
  std::vector<std::vector<int>> ancestors_;
  FrameKinematics fk_;
  std::vector<Triplet> triplets_;
  Eigen::VectorXd residual_;
  int rows_ = 0;
  SparseMatrix hessian_;
  SparseMatrix structural_diagonal_;
  Eigen::VectorXd gradient_;
  Eigen::VectorXd diagonal_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> solver_;
  bool analysed_ = false;
};

void check_targets(const FitTargets& targets, const KinematicTree& tree) {
  if (targets.frame_count() < 1) throw InvalidArgument("fit needs at least one frame");
  if (targets.masks.size() != targets.keypoints.size()) throw InvalidArgument("one mask per frame required");
  for (int f = 0; f < targets.frame_count(); ++f) {
    const Keypoints& kp = targets.keypoints[f];
    const JointMask& mask = targets.masks[f];
    if (kp.cols() != tree.joint_count() || static_cast<int>(mask.size()) != tree.joint_count()) {
      throw InvalidArgument("frame " + std::to_string(f) + " does not match the tree's joint count");
    }
    if (count_usable(mask) < kMinUsableJoints) {
      throw InvalidArgument("frame " + std::to_string(f) + " has fewer than 4 usable joints");
    }
    for (int k = 0; k < tree.joint_count(); ++k) {
      if (mask[k] && !kp.col(k).allFinite()) {
        throw InvalidArgument("frame " + std::to_string(f) + " has a non-finite usable keypoint");
      }
    }
  }
}

void check_state(const FitState& state, const FitTargets& targets, const KinematicTree& tree) {
  if (state.frame_count() != targets.frame_count() ||
      static_cast<int>(state.translation.size()) != targets.frame_count()) {
    throw InvalidArgument("state and targets disagree on frame count");
  }
  if (state.beta.size() != tree.shape_dim()) throw InvalidArgument("state shape dimension mismatch");
  for (const Eigen::VectorXd& th : state.theta) {
    if (th.size() != 3 * tree.joint_count()) throw InvalidArgument("state pose dimension mismatch");
  }
}

}  // namespace

void FitConfig::validate() const {
  if (!(lambda_data >= 0.0 && lambda_smooth >= 0.0 && lambda_shape >= 0.0)) {
    throw InvalidArgument("fit weights must be nonnegative");
  }
  if (!(tolerance > 0.0)) throw InvalidArgument("fit tolerance must be positive");
  if (max_frame_iterations < 0 || max_joint_iterations < 0) {
    throw InvalidArgument("iteration caps must be nonnegative");
  }
  if (!(initial_damping > 0.0 && damping_increase > 1.0 && damping_decrease > 0.0 && damping_decrease < 1.0)) {
    throw InvalidArgument("damping parameters out of range");
  }
}

double loss_3d(const Keypoints& pred, const Keypoints& target, const JointMask& mask) {
  check_mask(pred.cols(), target.cols(), mask);
  double s = 0.0;
  for (Eigen::Index k = 0; k < pred.cols(); ++k) {
    if (mask[k]) s += (pred.col(k) - target.col(k)).squaredNorm();
  }
  return std::sqrt(s);
}

double loss_2d(const Eigen::Matrix2Xd& pred, const Eigen::Matrix2Xd& target, const JointMask& mask) {
  check_mask(pred.cols(), target.cols(), mask);
  double s = 0.0;
  for (Eigen::Index k = 0; k < pred.cols(); ++k) {
    if (mask[k]) s += (pred.col(k) - target.col(k)).squaredNorm();
  }
  return std::sqrt(s);
}

double loss_smpl(const PoseParams& pred_theta, const ShapeParams& pred_beta,
                 const PoseParams& target_theta, const ShapeParams& target_beta) {
  if (pred_theta.vector().size() != target_theta.vector().size() || pred_beta.dim() != target_beta.dim()) {
    throw InvalidArgument("parameter dimensions differ");
  }
  return (pred_theta.vector() - target_theta.vector()).norm() +
         (pred_beta.vector() - target_beta.vector()).norm();
}

double smoothness_term(const std::vector<PoseParams>& theta) {
  double s = 0.0;
  for (std::size_t f = 1; f < theta.size(); ++f) {
    if (theta[f].joint_count() != theta[f - 1].joint_count()) throw InvalidArgument("pose sizes differ");
    for (int j = 0; j < theta[f].joint_count(); ++j) {
      const double angle = geodesic_angle(rodrigues(theta[f - 1].joint(j)), rodrigues(theta[f].joint(j)));
      s += angle * angle;
    }
  }
  return s;
}

Eigen::VectorXd FitState::flatten() const {
  const Eigen::Index stride = theta.empty() ? 3 : theta[0].size() + 3;
  Eigen::VectorXd x(beta.size() + stride * frame_count());
  x.head(beta.size()) = beta;
  for (int f = 0; f < frame_count(); ++f) {
    x.segment(beta.size() + f * stride, stride - 3) = theta[f];
    x.segment<3>(beta.size() + f * stride + stride - 3) = translation[f];
  }
  return x;
}

FitState FitState::unflatten(const Eigen::VectorXd& x, int frame_count, int joint_count, int shape_dim) {
  const int stride = 3 * joint_count + 3;
  if (x.size() != shape_dim + frame_count * stride) throw InvalidArgument("flattened state has wrong size");
  FitState s;
  s.beta = x.head(shape_dim);
  for (int f = 0; f < frame_count; ++f) {
    s.theta.push_back(x.segment(shape_dim + f * stride, 3 * joint_count));
    s.translation.push_back(x.segment<3>(shape_dim + f * stride + 3 * joint_count));
  }
  return s;
}

FitTargets FitTargets::from_sequence(const SequenceData& seq) {
  FitTargets t;
  for (const FrameData& frame : seq.frames) {
    Keypoints kp = frame.keypoints_3d.leftCols(seq.joint_count);
    JointMask mask(seq.joint_count);
    for (int k = 0; k < seq.joint_count; ++k) {
      const bool front = k < static_cast<int>(frame.in_front.size()) && frame.in_front[k];
      mask[k] = front && kp.col(k).allFinite();
    }
    t.keypoints.push_back(std::move(kp));
    t.masks.push_back(std::move(mask));
  }
  return t;
}

double objective_value(const FitState& state, const FitTargets& targets, const KinematicTree& tree,
                       const FitConfig& config) {
  check_state(state, targets, tree);
  SequenceProblem problem(targets, tree, config);
  return problem.cost(state.flatten());
}

Eigen::VectorXd objective_gradient(const FitState& state, const FitTargets& targets,
                                   const KinematicTree& tree, const FitConfig& config) {
  check_state(state, targets, tree);
  SequenceProblem problem(targets, tree, config);
  return problem.gradient(state.flatten());
}

FitResult fit_keypoints(const FitTargets& targets, const KinematicTree& tree, const FitConfig& config) {
  config.validate();
  check_targets(targets, tree);
  const auto start = std::chrono::steady_clock::now();
  const int n = tree.joint_count();
  const int s = tree.shape_dim();
  const int t_count = targets.frame_count();
  const auto ancestors = strict_ancestors(tree);

  FitResult result;
  FitState state;
  state.beta = initial_shape(targets, tree);
  state.theta.assign(t_count, Eigen::VectorXd::Zero(3 * n));
  state.translation.assign(t_count, Eigen::Vector3d::Zero());
  const Keypoints rest = joint_regress(ShapeParams(state.beta), tree);
  for (int f = 0; f < t_count; ++f) {
    state.translation[f] = targets.keypoints[f].col(0) - rest.col(0);
    if (!targets.masks[f][0]) state.translation[f] = Eigen::Vector3d::Zero();
  }

  bool per_frame_converged = true;
  if (config.schedule != FitSchedule::JointOnly) {
    for (int f = 0; f < t_count; ++f) {
      FrameProblem problem(targets.keypoints[f], targets.masks[f], rest, tree, ancestors, config.lambda_data);
      // Two starts: the closed-form initializer and the previous frame's solution.
      Eigen::VectorXd best;
      LmOutcome best_outcome;
      bool have_best = false;
      for (int start_kind = 0; start_kind < (f > 0 ? 2 : 1); ++start_kind) {
        Eigen::VectorXd x(problem.size());
        if (start_kind == 0) {
          Eigen::VectorXd theta;
          Eigen::Vector3d trans;
          initial_pose(targets.keypoints[f], targets.masks[f], rest, tree, theta, trans);
          x << theta, trans;
        } else {
          x << state.theta[f - 1], state.translation[f - 1];
          x.tail<3>() = state.translation[f - 1] +
                        (targets.keypoints[f].col(0) - targets.keypoints[f - 1].col(0));
          if (!targets.masks[f][0] || !targets.masks[f - 1][0]) x.tail<3>() = state.translation[f - 1];
        }
        LmOutcome outcome = levenberg_marquardt(problem, x, config.max_frame_iterations, config, false);
        result.iterations += outcome.iterations;
        if (!have_best || outcome.cost < best_outcome.cost) {
          best = std::move(x);
          best_outcome = std::move(outcome);
          have_best = true;
        }
      }
      state.theta[f] = best.head(3 * n);
      state.translation[f] = best.tail<3>();
      per_frame_converged = per_frame_converged && best_outcome.converged;
    }
  }

  if (config.schedule == FitSchedule::PerFrameOnly) {
    result.converged = per_frame_converged;
    result.objective = objective_value(state, targets, tree, config);
  } else {
    SequenceProblem problem(targets, tree, config);
    Eigen::VectorXd x = state.flatten();
    LmOutcome outcome = levenberg_marquardt(problem, x, config.max_joint_iterations, config, true);
    result.iterations += outcome.iterations;
    result.converged = outcome.converged;
    result.objective = outcome.cost;
    result.objective_history = std::move(outcome.history);
    state = FitState::unflatten(x, t_count, n, s);
  }

  result.beta = ShapeParams(state.beta);
  for (int f = 0; f < t_count; ++f) {
    result.theta.emplace_back(state.theta[f]);
    result.translation.emplace_back(state.translation[f]);
    const Keypoints pred = forward_kinematics(result.theta.back(), result.beta, result.translation.back(), tree);
    const JointMask& mask = targets.masks[f];
    const double l = loss_3d(pred, targets.keypoints[f], mask);
    result.residual_rms.push_back(std::sqrt(l * l / count_usable(mask)));
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.wall_time_per_frame = elapsed / t_count;
  return result;
}

FitResult fit_sequence(const SequenceData& seq, const KinematicTree& tree, const FitConfig& config) {
  if (seq.joint_count != tree.joint_count()) throw InvalidArgument("sequence joint count does not match the tree");
  return fit_keypoints(FitTargets::from_sequence(seq), tree, config);
}

std::vector<Keypoints> fitted_keypoints(const FitResult& result, const KinematicTree& tree) {
  std::vector<Keypoints> out;
  out.reserve(result.theta.size());
  for (std::size_t f = 0; f < result.theta.size(); ++f) {
    out.push_back(derive_extra_keypoints(
        forward_kinematics(result.theta[f], result.beta, result.translation[f], tree), tree));
  }
  return out;
}

}  // namespace synthbody
