#include <benchmark/benchmark.h>

#include "qwalk/asymptotics.hpp"

using namespace qwalk;

namespace {

const WalkModel& model() {
  static WalkModel m = [] {
    auto w = load_model(QWALK_BENCH_MODEL);
    require_valid(w);
    return w;
  }();
  return m;
}

void BM_Geometry(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(Geometry(model()).critical().x_d);
}
BENCHMARK(BM_Geometry);

void BM_Branch(benchmark::State& st) {
  Geometry g(model());
  double x = 1.1;
  for (auto _ : st) {
    benchmark::DoNotOptimize(g.Y1(x));
    x = x == 1.1 ? 1.1000001 : 1.1;
  }
}
BENCHMARK(BM_Branch);

void BM_GreenDirect(benchmark::State& st) {
  Geometry g(model());
  GreenOptions o;
  o.method = GreenMethod::Direct;
  int n = int(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(green_table(model(), g, {1, 1}, Box{n, n}, 1e-10, o).values.data());
}
BENCHMARK(BM_GreenDirect)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_GreenIterate(benchmark::State& st) {
  Geometry g(model());
  GreenOptions o;
  o.threads = int(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(green_table(model(), g, {1, 1}, Box{20, 20}, 1e-8, o).values.data());
}
BENCHMARK(BM_GreenIterate)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_Nu1(benchmark::State& st) {
  Geometry g(model());
  for (auto _ : st) benchmark::DoNotOptimize(nu1_series(model(), g, 40).coeffs.data());
}
BENCHMARK(BM_Nu1);

void BM_MonteCarlo(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(monte_carlo_green(model(), {1, 1}, {{1, 1}}, 20000, 1, 100000, 1).mean.data());
}
BENCHMARK(BM_MonteCarlo)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
