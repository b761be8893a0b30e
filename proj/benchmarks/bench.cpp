#include <benchmark/benchmark.h>

#include <vector>

#include "safegain/comparison.hpp"
#include "safegain/filters.hpp"
#include "safegain/scenarios.hpp"
#include "safegain/sim.hpp"

namespace {

using namespace safegain;

// Hot path of every sweep cell: one filter evaluation, gamma-shaped variant.
void BM_ImprovedIssfEval(benchmark::State& state) {
  const Scenario sc = make_scenario("example2_revisited");
  FilterSpec spec;
  spec.kind = FilterKind::ImprovedIssf;
  spec.barrier = sc.barrier;
  spec.uses_gamma = true;
  std::vector<Vec> xs;
  for (int i = 0; i < 64; ++i) {
    Vec x(1);
    x[0] = -2.0 + 4.0 * i / 63.0;
    xs.push_back(x);
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const Vec& x = xs[i++ & 63];
    benchmark::DoNotOptimize(eval_filter(sc.plant, spec, x, sc.u0(x)));
  }
}
BENCHMARK(BM_ImprovedIssfEval);

// Full integrator throughput, 1000 RK4 steps per iteration.
void BM_IntegrateExample2(benchmark::State& state) {
  const Scenario sc = make_scenario("example2");
  FilterSpec spec;
  spec.kind = FilterKind::InverseOptimal;
  spec.barrier = sc.barrier;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.horizon = 1.0;
  cfg.sigma = 1.0;
  cfg.x0 = sc.sweep_x0.back();
  cfg.escape_radius = sc.escape_radius;
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate(sc.plant, spec, sc.u0, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_IntegrateExample2);

// Transform evaluation without an analytic derivative inverse, so every
// call goes through the bracketing bisection.
void BM_LfTransformBisection(benchmark::State& state) {
  ComparisonFunction quartic;
  quartic.kind = FunctionClass::KInf;
  quartic.eval = [](double s) { return s * s * s * s; };
  quartic.deriv = [](double s) { return 4.0 * s * s * s; };
  const LegendreFenchel lf = lf_transform(quartic);
  double r = 0.0;
  for (auto _ : state) {
    r += 1e-3;
    if (r > 10.0) r = 1e-3;
    benchmark::DoNotOptimize(lf(r));
  }
}
BENCHMARK(BM_LfTransformBisection);

}  // namespace

BENCHMARK_MAIN();
