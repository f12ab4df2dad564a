#include "bax/acquisition.hpp"
#include "bax/loop.hpp"
#include "bax/problems.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace bax;

namespace {

Point pt1(double x) { return Point::Constant(1, x); }

PointList uniform_2d(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  PointList out(n, Point(2));
  for (auto& p : out) p << u(rng), u(rng);
  return out;
}

std::shared_ptr<const Posterior> posterior_2d(std::size_t n) {
  GPModel m;
  m.kernel.lengthscale = Vector::Constant(2, 2.0);
  Evidence e;
  for (const auto& x : uniform_2d(n, 99)) e.noisy.push_back({x, std::sin(x[0]) + std::cos(x[1])});
  return std::make_shared<const Posterior>(m, e);
}

void BM_PosteriorFit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(posterior_2d(n));
}
BENCHMARK(BM_PosteriorFit)->Arg(50)->Arg(150);

// Lazy sequential sampling without a finite support: cost grows with the realized points.
void BM_LazySamplePath(benchmark::State& state) {
  const auto post = posterior_2d(30);
  const auto xs = uniform_2d(static_cast<std::size_t>(state.range(0)), 5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    LazyFunctionSample s(post, seed++);
    for (const auto& x : xs) benchmark::DoNotOptimize(s.query(x));
  }
}
BENCHMARK(BM_LazySamplePath)->Arg(100)->Arg(200);

void BM_DrawTopKBundle(benchmark::State& state) {
  const auto post = posterior_2d(30);
  const TopKAlgorithm alg(uniform_2d(150, 1), 10);
  for (auto _ : state) benchmark::DoNotOptimize(draw_bundle(post, alg, 100, 3));
}
BENCHMARK(BM_DrawTopKBundle)->Unit(benchmark::kMillisecond);

void BM_Dijkstra(benchmark::State& state) {
  Vector lo(2), hi(2);
  lo << -2.0, -1.0;
  hi << 2.0, 4.0;
  const Graph g = make_grid_graph(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)), Box{lo, hi});
  const auto f = make_benchmark("rosenbrock_scaled");
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_dijkstra(g, n * (n - 1), n * n - 1,
                                          [&](const Point& x) { return eval_benchmark(f, x) + 0.1; }));
  }
}
BENCHMARK(BM_Dijkstra)->Arg(10)->Arg(20);

struct AcqFixture {
  std::shared_ptr<const Posterior> post;
  SampleBundle bundle;
  PointList grid;
  AcqFixture() {
    GPModel m;
    Evidence e;
    for (double x : {1.0, 4.2, 7.7}) e.noisy.push_back({pt1(x), std::sin(x)});
    post = std::make_shared<const Posterior>(m, e);
    PointList xs;
    for (int i = 0; i < 20; ++i) xs.push_back(pt1(10.0 * i / 19));
    bundle = draw_bundle(post, TopKAlgorithm(xs, 2), 100, 7);
    for (int i = 0; i < 200; ++i) grid.push_back(pt1(10.0 * i / 199));
  }
};

void BM_EIGv(benchmark::State& state) {
  const AcqFixture fx;
  for (auto _ : state) {
    ExactConditioningEIG eig(fx.post, fx.bundle, ExactConditioningEIG::Target::Subsequence);
    benchmark::DoNotOptimize(eig.evaluate(fx.grid));
  }
}
BENCHMARK(BM_EIGv)->Unit(benchmark::kMillisecond);

void BM_EIGe(benchmark::State& state) {
  const AcqFixture fx;
  for (auto _ : state) {
    ExactConditioningEIG eig(fx.post, fx.bundle, ExactConditioningEIG::Target::ExecutionPath);
    benchmark::DoNotOptimize(eig.evaluate(fx.grid));
  }
}
BENCHMARK(BM_EIGe)->Unit(benchmark::kMillisecond);

void BM_EIGout(benchmark::State& state) {
  const AcqFixture fx;
  AbcPolicy policy;
  policy.min_ball_size = 10;
  policy.entropy_mc_draws = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    OutputEIG eig(fx.post, fx.bundle, OutputDistance::jaccard_on_sets(), policy);
    benchmark::DoNotOptimize(eig.evaluate(fx.grid, 1));
  }
}
BENCHMARK(BM_EIGout)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
