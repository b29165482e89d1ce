#include <benchmark/benchmark.h>

#include <map>
#include <memory>
#include <random>

#include "platedg/assembly.hpp"
#include "platedg/hessian.hpp"

using namespace platedg;

namespace {

struct Problem {
  Mesh mesh;
  DgSpace space;
  Field y;
  explicit Problem(std::size_t n)
      : mesh(build_rect_mesh({0.0, 4.0, 0.0, 4.0}, n, n, {Side::left, Side::bottom})), space(mesh),
        y(space, BoundaryData::clamped_flat()) {
    std::mt19937 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    for (long i = 0; i < y.coeffs.size(); ++i) y.coeffs(i) = d(rng);
  }
};

const Problem& problem(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<Problem>> cache;
  auto& p = cache[n];
  if (!p) p = std::make_unique<Problem>(n);
  return *p;
}

Execution exec_of(const benchmark::State& s) { return s.range(1) ? Execution::parallel : Execution::serial; }

void BM_AssembleAh(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_ah_matrix(p.space, {5000.0, 1100.0}, exec_of(state)));
}

void BM_AssembleMetric(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_h2_metric(p.space, exec_of(state)));
}

void BM_ConstraintOperator(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(constraint_operator(p.y, exec_of(state)));
}

void BM_AhAction(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ah_action_direct(p.y, {5000.0, 1100.0}, exec_of(state)));
}

void BM_DiscreteHessian(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  static std::map<std::size_t, std::unique_ptr<HessianBasis>> bases;
  auto& hb = bases[static_cast<std::size_t>(state.range(0))];
  if (!hb) hb = std::make_unique<HessianBasis>(p.space);
  for (auto _ : state) benchmark::DoNotOptimize(discrete_hessian(*hb, p.y, exec_of(state)));
}

// Second argument: 0 serial reference, 1 OpenMP.
void Args(benchmark::internal::Benchmark* b) {
  for (long n : {16, 32, 64})
    for (long par : {0, 1}) b->Args({n, par});
  b->ArgNames({"n", "parallel"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_AssembleAh)->Apply(Args);
BENCHMARK(BM_AssembleMetric)->Apply(Args);
BENCHMARK(BM_ConstraintOperator)->Apply(Args);
BENCHMARK(BM_AhAction)->Apply(Args);
BENCHMARK(BM_DiscreteHessian)->Apply(Args);

BENCHMARK_MAIN();
