// Serial reference against the OpenMP sweep for the per-sample kernels.

#include <benchmark/benchmark.h>

#include "gnat/cli_report.hpp"

namespace {

const gnat::RunConfig& config() {
  static const gnat::RunConfig cfg = gnat::parse_config(R"J({
    "base_manifold": "sphere2", "profile": "cheeger_gromoll",
    "fields": {"rot": {"lift": "complete_lift", "X": ["sin(φ)", "cos(θ)/sin(θ)*cos(φ)"]},
               "xv": {"lift": "vertical_lift", "X": ["sin(φ)", "cos(θ)"]}},
    "samples": 32, "seed": 1})J");
  return cfg;
}

void run(benchmark::State& state, const char* command) {
  const auto exec = state.range(0) ? gnat::Exec::parallel : gnat::Exec::serial;
  for (auto _ : state) benchmark::DoNotOptimize(gnat::run_command(config(), command, exec));
  state.SetLabel(exec == gnat::Exec::parallel ? "openmp" : "serial");
}

void BM_LieDerivative(benchmark::State& s) { run(s, "lie-derivative xv"); }
void BM_VerifyKilling(benchmark::State& s) { run(s, "verify-killing rot"); }
void BM_Taylor(benchmark::State& s) { run(s, "taylor rot"); }

void BM_DualPath(benchmark::State& state) {
  gnat::SuiteOptions o;
  o.exec = state.range(0) ? gnat::Exec::parallel : gnat::Exec::serial;
  for (auto _ : state) benchmark::DoNotOptimize(gnat::run_criterion(1, o));
  state.SetLabel(state.range(0) ? "openmp" : "serial");
}

}  // namespace

BENCHMARK(BM_LieDerivative)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_VerifyKilling)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Taylor)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DualPath)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
