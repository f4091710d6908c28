#pragma once

#include <cmath>

#include "synthbody/fitter.hpp"
#include "synthbody/random.hpp"

namespace testsupport {

struct GradientCheck {
  double max_relative_error = 0.0;
  int checked = 0;
};

// Random state and random targets on a random number of frames. Targets come
// from a perturbed pose so the residuals are not small.
inline void random_problem(synthbody::Rng& rng, const synthbody::KinematicTree& tree, synthbody::FitState& state,
                           synthbody::FitTargets& targets, int frames) {
  using namespace synthbody;
  const int n = tree.joint_count();
  state = {};
  targets = {};
  state.beta.resize(tree.shape_dim());
  for (int i = 0; i < tree.shape_dim(); ++i) state.beta[i] = uniform(rng, -2, 2);
  Eigen::VectorXd gt_beta = state.beta;
  for (int i = 0; i < tree.shape_dim(); ++i) gt_beta[i] += uniform(rng, -0.5, 0.5);
  for (int f = 0; f < frames; ++f) {
    Eigen::VectorXd theta(3 * n);
    for (int i = 0; i < theta.size(); ++i) theta[i] = 0.6 * standard_normal(rng);
    const Eigen::Vector3d t(uniform(rng, -2, 2), uniform(rng, 0, 2), uniform(rng, -2, 2));
    state.theta.push_back(theta);
    state.translation.push_back(t);
    Eigen::VectorXd target_theta = theta;
    for (int i = 0; i < theta.size(); ++i) target_theta[i] += 0.2 * standard_normal(rng);
    Keypoints kp = forward_kinematics(PoseParams(target_theta), ShapeParams(gt_beta),
                                      Translation(t + Eigen::Vector3d(0.05, -0.02, 0.03)), tree);
    JointMask mask(n, true);
    for (int k = 0; k < n; ++k) mask[k] = uniform01(rng) > 0.15;
    mask[0] = true;
    targets.keypoints.push_back(kp);
    targets.masks.push_back(mask);
  }
}

// Central differences with step h against objective_gradient. Components whose
// analytic and numeric magnitudes are both below `floor` are skipped.
inline GradientCheck check_gradient(const synthbody::FitState& state, const synthbody::FitTargets& targets,
                                    const synthbody::KinematicTree& tree, const synthbody::FitConfig& config,
                                    double h = 1e-6, double floor = 1e-8) {
  using namespace synthbody;
  const Eigen::VectorXd g = objective_gradient(state, targets, tree, config);
  const Eigen::VectorXd x = state.flatten();
  GradientCheck out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const int frames = state.frame_count();
    const double fp = objective_value(FitState::unflatten(xp, frames, tree.joint_count(), tree.shape_dim()), targets,
                                      tree, config);
    const double fm = objective_value(FitState::unflatten(xm, frames, tree.joint_count(), tree.shape_dim()), targets,
                                      tree, config);
    const double fd = (fp - fm) / (2.0 * h);
    const double scale = std::max(std::abs(g[i]), std::abs(fd));
    if (scale <= floor) continue;
    out.max_relative_error = std::max(out.max_relative_error, std::abs(g[i] - fd) / scale);
    ++out.checked;
  }
  return out;
}

}  // namespace testsupport
