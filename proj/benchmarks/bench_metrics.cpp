#include <benchmark/benchmark.h>

#include "synthbody/metrics.hpp"
#include "synthbody/random.hpp"

using namespace synthbody;

static Keypoints cloud(Rng& rng, int n) {
  Keypoints k(3, n);
  for (int i = 0; i < n; ++i) k.col(i) = Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return k;
}

static void BM_mpjpe(benchmark::State& state) {
  Rng rng(3);
  const Keypoints a = cloud(rng, 24), b = cloud(rng, 24);
  for (auto _ : state) benchmark::DoNotOptimize(mpjpe(a, b));
}

static void BM_pa_mpjpe(benchmark::State& state) {
  Rng rng(4);
  const Keypoints a = cloud(rng, 24), b = cloud(rng, 24);
  for (auto _ : state) benchmark::DoNotOptimize(pa_mpjpe(a, b));
}

BENCHMARK(BM_mpjpe);
BENCHMARK(BM_pa_mpjpe);

BENCHMARK_MAIN();
