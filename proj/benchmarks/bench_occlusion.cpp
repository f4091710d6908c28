#include <benchmark/benchmark.h>

#include <vector>

#include "synthbody/camera.hpp"
#include "synthbody/scene_occlusion.hpp"
#include "synthbody/synth_engine.hpp"

using namespace synthbody;

static void BM_ray_cast(benchmark::State& state) {
  const Scene scene = Scene::defaults();
  const Eigen::Vector3d origin(0.0, 1.5, -6.0);
  const Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.1, 1.0).normalized();
  for (auto _ : state) {
    auto hit = ray_cast(origin, dir, scene.primitives);
    benchmark::DoNotOptimize(hit);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(scene.primitives.size()));
}

static void BM_label_frame(benchmark::State& state) {
  const KinematicTree tree = KinematicTree::smpl_like();
  const Scene scene = Scene::defaults();
  const Keypoints k = joint_regress(ShapeParams::zero(tree.shape_dim()), tree);
  const Camera cam = look_at({0.5, 1.2, -4.0}, {0.0, 0.0, 0.0}, Intrinsics{});
  const auto caps = body_capsules(k, tree, scene.radii);
  for (auto _ : state) {
    for (int j = 0; j < tree.joint_count(); ++j) {
      auto label = classify_joint(j, k, cam, scene.primitives, caps, tree);
      benchmark::DoNotOptimize(label);
    }
  }
  state.SetItemsProcessed(state.iterations() * tree.joint_count());
}

static void BM_synthesize_sequence(benchmark::State& state) {
  SynthContext ctx{KinematicTree::smpl_like(), Scene::defaults(), {}, {}};
  ctx.catalogs = Catalogs::defaults(ctx.tree);
  const ScenarioSpec spec = generate_scenario(11, ctx.catalogs);
  for (auto _ : state) {
    SequenceData seq = synthesize_sequence(spec, ctx);
    benchmark::DoNotOptimize(seq.frames.data());
  }
}

BENCHMARK(BM_ray_cast);
BENCHMARK(BM_label_frame);
BENCHMARK(BM_synthesize_sequence)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
