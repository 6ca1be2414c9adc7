// Serial vs OpenMP block solves, and serial vs parallel multistart.

#include <string>

#include <benchmark/benchmark.h>
#include <fmt/core.h>

#include "nadmm/admm.hpp"
#include "nadmm/analysis.hpp"
#include "nadmm/model.hpp"

using namespace nadmm;

namespace {

// N copies of the two-variable quartic-on-a-circle block, all tied to one y.
Problem consensus_blocks(int n_blocks) {
  BlockProblem bp;
  bp.y_names = {"y"};
  for (int i = 0; i < n_blocks; ++i) {
    const std::string a = fmt::format("a{}", i), b = fmt::format("b{}", i);
    CoupledBlock blk;
    blk.x_names = {a, b};
    const double shift = 0.5 + 0.01 * i;
    blk.objective = parse_expr_text(fmt::format("({0}^2 - 1)^2 + {2} * ({1} - 1)^2 + sin({0} * {1})", a, b, shift));
    blk.constraints = {parse_expr_text(fmt::format("{0}^2 + {1}^2 - 2", a, b))};
    blk.A = Matrix::Zero(1, 2);
    blk.A(0, 0) = 1.0;
    blk.B = Matrix::Constant(1, 1, -1.0);
    blk.b = Vector::Zero(1);
    bp.blocks.push_back(std::move(blk));
  }
  return canonicalize_block(bp);
}

AdmmConfig bench_config(int n_blocks, bool parallel) {
  AdmmConfig cfg;
  cfg.rho = 25.0;
  cfg.max_iter = 20;
  cfg.eta_p = cfg.eta_d = 1e-14;  // run all 20 iterations
  Vector x0(2 * n_blocks);
  for (int i = 0; i < n_blocks; ++i) {
    x0[2 * i] = 1.2;
    x0[2 * i + 1] = 0.7;
  }
  cfg.x0 = x0;
  cfg.parallel_blocks = parallel;
  return cfg;
}

void BM_AdmmSteps(benchmark::State& state, bool parallel) {
  const int n_blocks = static_cast<int>(state.range(0));
  const AdmmSolver solver(consensus_blocks(n_blocks), bench_config(n_blocks, parallel));
  for (auto _ : state) {
    auto result = solver.run();
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * 20);
}

void BM_AdmmSerial(benchmark::State& state) { BM_AdmmSteps(state, false); }
void BM_AdmmParallel(benchmark::State& state) { BM_AdmmSteps(state, true); }

void BM_Multistart(benchmark::State& state, bool parallel) {
  const Problem prob = consensus_blocks(3);
  analysis::ReferenceOptions opts;
  opts.n_starts = static_cast<int>(state.range(0));
  opts.seed = 1;
  opts.parallel = parallel;
  for (auto _ : state) {
    auto refs = analysis::reference_solution(prob, opts);
    benchmark::DoNotOptimize(refs);
  }
}

void BM_MultistartSerial(benchmark::State& state) { BM_Multistart(state, false); }
void BM_MultistartParallel(benchmark::State& state) { BM_Multistart(state, true); }

}  // namespace

BENCHMARK(BM_AdmmSerial)->RangeMultiplier(4)->Range(4, 256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdmmParallel)->RangeMultiplier(4)->Range(4, 256)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MultistartSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MultistartParallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
