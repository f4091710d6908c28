#include <benchmark/benchmark.h>

#include "synthbody/body_model.hpp"
#include "synthbody/random.hpp"

using namespace synthbody;

static PoseParams random_pose(int joints, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd theta(3 * joints);
  for (int i = 0; i < theta.size(); ++i) theta[i] = 0.5 * standard_normal(rng);
  return PoseParams(theta);
}

static void BM_joint_regress(benchmark::State& state) {
  const KinematicTree tree = KinematicTree::smpl_like();
  const ShapeParams beta = ShapeParams::zero(tree.shape_dim());
  for (auto _ : state) {
    Keypoints k = joint_regress(beta, tree);
    benchmark::DoNotOptimize(k.data());
  }
}

static void BM_forward_kinematics(benchmark::State& state) {
  const KinematicTree tree = KinematicTree::smpl_like();
  const PoseParams theta = random_pose(tree.joint_count(), 1);
  const ShapeParams beta = ShapeParams::zero(tree.shape_dim());
  const Translation t(Eigen::Vector3d(0.1, 0.9, 2.0));
  for (auto _ : state) {
    Keypoints k = forward_kinematics(theta, beta, t, tree);
    benchmark::DoNotOptimize(k.data());
  }
  state.SetItemsProcessed(state.iterations() * tree.joint_count());
}

BENCHMARK(BM_joint_regress);
BENCHMARK(BM_forward_kinematics);

BENCHMARK_MAIN();
