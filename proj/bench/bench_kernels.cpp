// Serial reference kernels against their OpenMP counterparts.
#include "mpclab/alpha.hpp"
#include "mpclab/growth.hpp"
#include "mpclab/kernels.hpp"
#include "mpclab/systems.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace mpclab;

namespace {

OcpSpec generator_spec(double T) {
  const ControlSystem gen = generator_system();
  return make_ocp_spec(gen, quadratic_cost(gen, 0.01), T, 0.05);
}

struct GradientFixture {
  OcpSpec spec = generator_spec(2.6);
  ShootingProblem problem{spec, spec.system->equilibrium_state() + Vector{{0.1, -0.1, 0.2}}};
  std::vector<double> u = std::vector<double>(problem.variables(), 0.3);
  std::vector<double> grad = std::vector<double>(problem.variables());
  Checkpoints checkpoints;
  GradientFixture() { (void)problem.evaluate(u, &checkpoints); }
};

void BM_GradientReference(benchmark::State& state) {
  GradientFixture f;
  for (auto _ : state) kernels::fd_gradient_reference(f.problem, f.u, 1e-6, f.grad);
}

void BM_GradientSerial(benchmark::State& state) {
  GradientFixture f;
  for (auto _ : state) kernels::fd_gradient_serial(f.problem, f.u, f.checkpoints, 1e-6, f.grad);
}

void BM_GradientParallel(benchmark::State& state) {
  GradientFixture f;
  for (auto _ : state) kernels::fd_gradient_parallel(f.problem, f.u, f.checkpoints, 1e-6, f.grad);
}

std::vector<Vector> sweep_states() {
  const Vector xs = generator_system().equilibrium_state();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-0.1, 0.1);
  std::vector<Vector> out;
  for (int i = 0; i < 8; ++i) out.push_back(xs + Vector{{d(rng), d(rng), d(rng)}});
  return out;
}

void BM_GrowthSweep(benchmark::State& state) {
  const OcpSpec fam = generator_spec(0.05);
  const auto states = sweep_states();
  GrowthOptions opts;
  opts.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(compute_B(fam, states, 10, opts));
}

void BM_AlphaScan(benchmark::State& state) {
  std::vector<double> v(240);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  const GrowthBound b = GrowthBound::from_values(0.0125, v);
  const auto Ts = uniform_grid(0.0125, 1, 240);
  for (auto _ : state) {
    if (state.range(0) != 0)
      benchmark::DoNotOptimize(alpha_scan(b, Ts, Ts));
    else
      benchmark::DoNotOptimize(alpha_scan_serial(b, Ts, Ts));
  }
}

}  // namespace

BENCHMARK(BM_GradientReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GrowthSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AlphaScan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
