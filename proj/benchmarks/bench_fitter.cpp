#include <benchmark/benchmark.h>

#include "synthbody/fitter.hpp"
#include "synthbody/synth_engine.hpp"

using namespace synthbody;

namespace {

SequenceData sequence(const SynthContext& ctx, int frames) {
  SequenceData seq = synthesize_sequence(generate_scenario(5, ctx.catalogs), ctx);
  if (seq.frame_count() > frames) seq.frames.erase(seq.frames.begin() + frames, seq.frames.end());
  return seq;
}

SynthContext context() {
  SynthContext ctx{KinematicTree::smpl_like(), Scene::defaults(), {}, {}};
  ctx.catalogs = Catalogs::defaults(ctx.tree);
  return ctx;
}

}  // namespace

static void BM_objective_gradient(benchmark::State& state) {
  const SynthContext ctx = context();
  const SequenceData seq = sequence(ctx, static_cast<int>(state.range(0)));
  const FitTargets targets = FitTargets::from_sequence(seq);
  FitState s;
  s.beta = Eigen::VectorXd::Zero(ctx.tree.shape_dim());
  for (int f = 0; f < targets.frame_count(); ++f) {
    s.theta.push_back(Eigen::VectorXd::Constant(3 * ctx.tree.joint_count(), 0.05));
    s.translation.push_back(targets.keypoints[f].col(0));
  }
  const FitConfig config;
  for (auto _ : state) {
    Eigen::VectorXd g = objective_gradient(s, targets, ctx.tree, config);
    benchmark::DoNotOptimize(g.data());
  }
}

static void BM_fit_sequence(benchmark::State& state) {
  const SynthContext ctx = context();
  const SequenceData seq = sequence(ctx, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    FitResult r = fit_sequence(seq, ctx.tree);
    benchmark::DoNotOptimize(r.objective);
  }
  state.SetItemsProcessed(state.iterations() * seq.frame_count());
}

BENCHMARK(BM_objective_gradient)->Arg(1)->Arg(30);
BENCHMARK(BM_fit_sequence)->Arg(1)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
