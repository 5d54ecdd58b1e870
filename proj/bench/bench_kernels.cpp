// Serial reference vs OpenMP kernels on a mid-size problem.

#include "aoed/experiments.hpp"

#include <benchmark/benchmark.h>

#include <memory>

namespace {

using namespace aoed;

struct Bench {
  std::unique_ptr<Problem> problem;
  std::shared_ptr<const LowRankSurrogate> surrogate;
  std::unique_ptr<OedObjective> objective;
  Vector w;

  static Bench& get() {
    static Bench b = [] {
      Bench x;
      x.problem = std::make_unique<Problem>(config_from_yaml_text("", {"mesh.resolution=24", "surrogate.rank=60"}));
      x.surrogate = x.problem->surrogate();
      x.objective = std::make_unique<OedObjective>(x.problem->objective(x.surrogate));
      x.w = Vector::Constant(x.problem->num_sensors(), 0.4);
      return x;
    }();
    return b;
  }
};

void BM_ObjectiveReference(benchmark::State& state) {
  auto& b = Bench::get();
  for (auto _ : state) benchmark::DoNotOptimize(b.objective->evaluate_reference(b.w).value);
}
BENCHMARK(BM_ObjectiveReference)->Unit(benchmark::kMillisecond);

void BM_ObjectiveParallel(benchmark::State& state) {
  auto& b = Bench::get();
  for (auto _ : state) benchmark::DoNotOptimize(b.objective->evaluate_parallel(b.w).value);
}
BENCHMARK(BM_ObjectiveParallel)->Unit(benchmark::kMillisecond);

void apply_columns_bench(benchmark::State& state, Execution exec) {
  auto& b = Bench::get();
  const PreconditionedForwardMap op(b.problem->fmap);
  Rng rng = make_rng(1);
  const Matrix x = standard_normal(rng, op.cols(), 8);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::apply_columns(op, x, exec).data());
}

void BM_ForwardColumnsSerial(benchmark::State& state) { apply_columns_bench(state, Execution::serial); }
void BM_ForwardColumnsParallel(benchmark::State& state) { apply_columns_bench(state, Execution::parallel); }
BENCHMARK(BM_ForwardColumnsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardColumnsParallel)->Unit(benchmark::kMillisecond);

void BM_DenseForwardAssembly(benchmark::State& state) {
  auto& b = Bench::get();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(assemble_dense_F(b.problem->fmap, exec).data());
}
BENCHMARK(BM_DenseForwardAssembly)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
