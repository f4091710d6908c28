#pragma once

#include <vector>

#include <Eigen/Core>

#include "synthbody/body_model.hpp"
#include "synthbody/synth_engine.hpp"

namespace synthbody {

/// Usable-joint mask; true means the joint contributes to the data term.
using JointMask = std::vector<bool>;

enum class FitSchedule {
  Staged,        // per-frame pose solves, then joint refinement with smoothing and shape
  PerFrameOnly,  // stop after the per-frame solves (shape keeps its bone-length initialization)
  JointOnly,     // skip the per-frame solves
};

struct FitConfig {
  double lambda_data = 1.0;
  double lambda_smooth = 0.1;
  double lambda_shape = 1e-3;
  int max_frame_iterations = 200;
  int max_joint_iterations = 100;
  /// Stop once an accepted step lowers the objective by less than this.
  double tolerance = 1e-10;
  FitSchedule schedule = FitSchedule::Staged;
  /// Levenberg-Marquardt damping: initial value relative to the largest
  /// normal-matrix diagonal; the first growth factor after a rejected step
  /// (doubled on each further rejection); the smallest shrink factor after an
  /// accepted step, reached when the quadratic model is exact.
  double initial_damping = 1e-4;
  double damping_increase = 2.0;
  double damping_decrease = 1.0 / 3.0;

  void validate() const;
};

struct FitResult {
  ShapeParams beta;
  std::vector<PoseParams> theta;
  std::vector<Translation> translation;
  std::vector<double> residual_rms;  // per frame, meters, over usable joints
  int iterations = 0;                // total optimizer iterations over all stages
  bool converged = false;
  double wall_time_per_frame = 0.0;  // seconds
  double objective = 0.0;
  /// Objective after every accepted step of the joint refinement.
  std::vector<double> objective_history;

  int frame_count() const { return static_cast<int>(theta.size()); }
};

/// Root-sum-of-squares distance over masked joints (meters in, meters out).
/// Throws InvalidArgument on shape mismatch or an empty mask.
double loss_3d(const Keypoints& pred, const Keypoints& target, const JointMask& mask);

/// Same as loss_3d for pixel coordinates.
double loss_2d(const Eigen::Matrix2Xd& pred, const Eigen::Matrix2Xd& target, const JointMask& mask);

/// ||theta - theta_hat|| + ||beta - beta_hat||.
double loss_smpl(const PoseParams& pred_theta, const ShapeParams& pred_beta,
                 const PoseParams& target_theta, const ShapeParams& target_beta);

/// Sum over consecutive frames and joints of the squared geodesic rotation angle (rad^2).
double smoothness_term(const std::vector<PoseParams>& theta);

/// Free parameters of a sequence fit. Flattened layout: beta, then for every
/// frame its 3J pose entries followed by the 3 translation entries.
struct FitState {
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> theta;
  std::vector<Eigen::Vector3d> translation;

  int frame_count() const { return static_cast<int>(theta.size()); }
  Eigen::VectorXd flatten() const;
  static FitState unflatten(const Eigen::VectorXd& x, int frame_count, int joint_count, int shape_dim);
};

/// Per-frame data-term targets: native joints and their usable masks.
struct FitTargets {
  std::vector<Keypoints> keypoints;
  std::vector<JointMask> masks;

  int frame_count() const { return static_cast<int>(keypoints.size()); }
  /// Targets from a sequence: the native joints, masked by in-front and finiteness.
  static FitTargets from_sequence(const SequenceData& seq);
};

/// lambda_data * sum_t loss_3d^2 + lambda_smooth * smoothness + lambda_shape * ||beta||^2.
double objective_value(const FitState& state, const FitTargets& targets, const KinematicTree& tree,
                       const FitConfig& config);

/// Analytic gradient of objective_value with respect to the flattened state.
Eigen::VectorXd objective_gradient(const FitState& state, const FitTargets& targets,
                                   const KinematicTree& tree, const FitConfig& config);

/// Recovers one shape for the sequence plus per-frame pose and translation.
/// Throws InvalidArgument if a frame has fewer than 4 usable joints or the
/// targets are non-finite where usable. Non-convergence is reported through
/// FitResult::converged; the best iterate is returned.
FitResult fit_keypoints(const FitTargets& targets, const KinematicTree& tree, const FitConfig& config = {});

FitResult fit_sequence(const SequenceData& seq, const KinematicTree& tree, const FitConfig& config = {});

/// Fitted keypoints per frame (native joints followed by head-top and nose).
std::vector<Keypoints> fitted_keypoints(const FitResult& result, const KinematicTree& tree);

}  // namespace synthbody
