// Serial reference vs OpenMP kernels: one HJB row sweep, the full solve and
// a batch of Monte Carlo paths.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "vctl/control.hpp"
#include "vctl/hjb.hpp"

using namespace vctl;

namespace {

const ScalarSystem& system_rl() {
  static const ScalarSystem sys{Kernel::riemann_liouville(0.75), 1.0, 0.5};
  return sys;
}

HjbGrids bench_grids(int n, Execution ex) {
  HjbGrids g;
  g.n_tau = n;
  g.n_y = n;
  g.execution = ex;
  return g;
}

struct SweepFixture {
  ValueGrid grid;
  std::vector<double> R, weights, variances;
  std::size_t k;

  explicit SweepFixture(int n) {
    grid = solve_hjb(system_rl(), Hamiltonian(-1.0, 1.0), Payoff::tanh(1.0, 0.0, 0.5), 1.0,
                     bench_grids(n, Execution::serial));
    k = grid.n_tau() - 1;
    R.assign(grid.f.size(), 0.0);
    for (std::size_t i = 0; i < R.size(); ++i) R[i] = std::sin(1e-3 * static_cast<double>(i));
    for (std::size_t j = 1; j < k; ++j) {
      weights.push_back(grid.tau[j] - grid.tau[j - 1]);
      variances.push_back(grid.gramian[k] - grid.gramian[j] + 1e-3);
    }
  }
  RowSweep sweep() const { return {&grid, &R, &weights, &variances, k}; }
};

const SweepFixture& fixture(int n) {
  static const SweepFixture f100(100), f200(200);
  return n == 100 ? f100 : f200;
}

void BM_RowSweepSerial(benchmark::State& st) {
  const auto& f = fixture(static_cast<int>(st.range(0)));
  std::vector<double> out(f.grid.n_y);
  for (auto _ : st) {
    sweep_row_serial(f.sweep(), out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_RowSweepParallel(benchmark::State& st) {
  const auto& f = fixture(static_cast<int>(st.range(0)));
  std::vector<double> out(f.grid.n_y);
  for (auto _ : st) {
    sweep_row_parallel(f.sweep(), out);
    benchmark::DoNotOptimize(out.data());
  }
}

void solve(benchmark::State& st, Execution ex) {
  const int n = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto vg = solve_hjb(system_rl(), Hamiltonian(-1.0, 1.0), Payoff::tanh(1.0, 0.0, 0.5), 1.0, bench_grids(n, ex));
    benchmark::DoNotOptimize(vg.f.data());
  }
}
void BM_SolveSerial(benchmark::State& st) { solve(st, Execution::serial); }
void BM_SolveParallel(benchmark::State& st) { solve(st, Execution::parallel); }

void paths(benchmark::State& st, Execution ex) {
  static const auto k = Kernel::riemann_liouville(0.75);
  static const LiftedModel model(discretize_measure(k, 40, 1e-3, 1.0), k, Coefficients{0.0, 1.0, 0.5});
  const auto x0 = lift_initial_curve(model.nodes(), InitialCurve::constant(0.0));
  SimConfig cfg;
  cfg.dt = 2e-3;
  cfg.n_paths = static_cast<std::size_t>(st.range(0));
  cfg.seed = 1;
  cfg.execution = ex;
  cfg.store_paths = false;
  for (auto _ : st) {
    auto b = simulate_lifted(model, x0, OpenLoopControl::constant(0.5), cfg);
    benchmark::DoNotOptimize(b.terminal_y.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
void BM_PathsSerial(benchmark::State& st) { paths(st, Execution::serial); }
void BM_PathsParallel(benchmark::State& st) { paths(st, Execution::parallel); }

}  // namespace

BENCHMARK(BM_RowSweepSerial)->Arg(100)->Arg(200);
BENCHMARK(BM_RowSweepParallel)->Arg(100)->Arg(200);
BENCHMARK(BM_SolveSerial)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveParallel)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathsSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathsParallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
