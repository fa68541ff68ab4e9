// Serial reference path against the OpenMP path for the batch kernels.

#include <benchmark/benchmark.h>

#include <random>

#include "instances.hpp"
#include "robustam/solvers.hpp"

using namespace robustam;

namespace {

testing_support::Instance instance(int depth, int options) {
  std::mt19937_64 rng(1234);
  testing_support::Shape s;
  s.max_depth = depth;
  s.options = options;
  // Draw until the tree has the full depth.
  for (;;) {
    auto in = testing_support::random_instance(rng, s);
    if (in.tree->terminal() == depth) return in;
  }
}

SolverOptions with(Exec e) {
  SolverOptions o;
  o.exec = e;
  return o;
}

void BM_StaticEnumeration(benchmark::State& state) {
  const auto in = instance(2, 1);
  const auto opt = with(static_cast<Exec>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(static_info_value(in.model, in.z, 20000, opt).value);
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_ChargeablePaths(benchmark::State& state) {
  const auto in = instance(3, 1);
  const auto opt = with(static_cast<Exec>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(chargeable_paths(in.model, opt));
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_RobustDpp(benchmark::State& state) {
  const auto in = instance(4, 0);
  const auto opt = with(static_cast<Exec>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(robust_dpp(in.model, in.z, opt).value);
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_StaticEnumeration)->Arg(static_cast<int>(Exec::serial))->Arg(static_cast<int>(Exec::parallel));
BENCHMARK(BM_ChargeablePaths)->Arg(static_cast<int>(Exec::serial))->Arg(static_cast<int>(Exec::parallel));
BENCHMARK(BM_RobustDpp)->Arg(static_cast<int>(Exec::serial))->Arg(static_cast<int>(Exec::parallel));

BENCHMARK_MAIN();
