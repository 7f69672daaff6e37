// Serial reference vs OpenMP kernel, same inputs. Run with
// --benchmark_filter=Gram etc.; CRC_THREADS or OMP_NUM_THREADS sets the width.
#include "crc/gram.hpp"
#include "crc/kernels.hpp"
#include "crc/rng.hpp"
#include "crc/crc_s.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace crc;

namespace {

RowMatrix normal_matrix(Index n, Index p, std::uint64_t seed) {
  const rng::Stream s(seed, 0);
  RowMatrix m(n, p);
  for (Index i = 0; i < n; ++i) s.fill_normal_serial(static_cast<std::uint32_t>(i), m.row(i).data(), std::uint64_t(p));
  return m;
}

LabelVector alternating(Index n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[std::size_t(i)] = i % 2 ? 1 : -1;
  return LabelVector(v);
}

void args(benchmark::internal::Benchmark* b) {
  b->Args({100, 20000})->Args({200, 20000})->Unit(benchmark::kMillisecond);
}

template <MatrixXd (*Kernel)(const RowMatrix&)>
void BM_Gram(benchmark::State& state) {
  const RowMatrix z = normal_matrix(state.range(0), state.range(1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(z));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0) * state.range(1));
}
BENCHMARK_TEMPLATE(BM_Gram, kernels::gram_serial)->Apply(args);
BENCHMARK_TEMPLATE(BM_Gram, kernels::gram_parallel)->Apply(args);

template <kernels::ClassColumnStats (*Kernel)(const RowMatrix&, const LabelVector&)>
void BM_ClassStats(benchmark::State& state) {
  const RowMatrix z = normal_matrix(state.range(0), state.range(1), 2);
  const LabelVector t = alternating(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(z, t));
}
BENCHMARK_TEMPLATE(BM_ClassStats, kernels::class_column_stats_serial)->Apply(args);
BENCHMARK_TEMPLATE(BM_ClassStats, kernels::class_column_stats_parallel)->Apply(args);

template <kernels::LooScreeningScores (*Kernel)(const kernels::LooScreeningProblem&)>
void BM_LooScreening(benchmark::State& state) {
  const Index n = state.range(0), p = state.range(1);
  const RowMatrix z = normal_matrix(n, p, 3);
  const LabelVector t = alternating(n);
  const DataMatrix dm = center_columns(z);
  const GramState g = build_gram(dm);
  const std::vector<Index> grid = screening_grid(p);
  kernels::LooScreeningProblem problem;
  problem.features = &dm.values();
  problem.labels = &t;
  problem.grid = grid;
  problem.projection_source = &g.effective_inverse;
  problem.projection_basis = &dm.values();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(problem));
}
BENCHMARK_TEMPLATE(BM_LooScreening, kernels::loo_screened_scores_serial)->Args({100, 5000})->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_LooScreening, kernels::loo_screened_scores_parallel)->Args({100, 5000})->Unit(benchmark::kMillisecond);

void BM_NormalFillSerial(benchmark::State& state) {
  const rng::Stream s(4, 0);
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) s.fill_normal_serial(0, out.data(), out.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
void BM_NormalFillParallel(benchmark::State& state) {
  const rng::Stream s(4, 0);
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) s.fill_normal_parallel(0, out.data(), out.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NormalFillSerial)->Arg(1 << 22)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NormalFillParallel)->Arg(1 << 22)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
