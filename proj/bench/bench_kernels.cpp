// Parallel kernels against their sequential references.
#include "isddp/cuts.hpp"
#include "isddp/driver.hpp"
#include "isddp/oracle.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace isddp;

namespace {

CutPool make_pool(int dim, int cuts) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  CutPool p = CutPool::constant(dim, -5.0);
  for (int k = 0; k < cuts; ++k) {
    Vec s(dim);
    for (int i = 0; i < dim; ++i) s[i] = U(rng);
    p.append(Cut{U(rng), s, 0.0, CutOrigin::kGeneral, k});
  }
  return p;
}

SubproblemInstance make_instance() {
  SubproblemInstance s;
  s.cost = PolyhedralFunction(2, 2, {AffinePiece{Vec::Ones(2), -Vec::Ones(2), 0.0},
                                     AffinePiece{-Vec::Ones(2), Vec::Ones(2), 0.0},
                                     AffinePiece{Vec::Unit(2, 0), Vec::Unit(2, 1), 0.3}});
  s.A = Mat(0, 2);
  s.B = Mat(0, 2);
  s.b = Vec(0);
  s.Y = Box(Vec::Zero(2), Vec::Ones(2));
  s.x_domain = Box(Vec::Constant(2, -1.0), Vec::Constant(2, 2.0));
  s.xbar = Vec::Zero(2);
  return s;
}

// One 1-D stage problem repeated with many realizations.
MultistageProblem wide_problem(int realizations) {
  MultistageProblem p;
  p.horizon = 3;
  p.x0 = Vec::Ones(1);
  for (int t = 1; t <= 3; ++t) {
    StageModel st;
    st.state_dim = 1;
    st.state_set = Box(Vec::Zero(1), Vec::Constant(1, 2.0));
    const int n = t == 1 ? 1 : realizations;
    for (int j = 0; j < n; ++j) {
      Realization r;
      r.probability = 1.0 / n;
      r.A = Mat(0, 1);
      r.B = Mat(0, 1);
      r.b = Vec(0);
      double d = 2.0 * (j + 0.5) / n;
      r.cost = PolyhedralFunction(1, 1, {AffinePiece{Vec::Ones(1), Vec::Zero(1), -d},
                                         AffinePiece{-Vec::Ones(1), Vec::Zero(1), d},
                                         AffinePiece{Vec::Constant(1, 1.3), -Vec::Constant(1, 0.3), -d},
                                         AffinePiece{-Vec::Constant(1, 1.3), Vec::Constant(1, 0.3), d}});
      st.realizations.push_back(r);
    }
    p.stages.push_back(st);
  }
  return p;
}

void BM_PoolEval(benchmark::State& state) {
  auto pool = make_pool(2, 500);
  auto grid = oracle::box_grid(Box(Vec::Constant(2, -1.0), Vec::Ones(2)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(pool.eval_all(grid));
}

void BM_PoolEvalSerial(benchmark::State& state) {
  auto pool = make_pool(2, 500);
  auto grid = oracle::box_grid(Box(Vec::Constant(2, -1.0), Vec::Ones(2)), 200);
  for (auto _ : state) benchmark::DoNotOptimize(pool.eval_all_serial(grid));
}

void BM_ValueGrid(benchmark::State& state) {
  auto inst = make_instance();
  auto grid = oracle::box_grid(inst.x_domain, 40);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::single_value_function_grid(inst, grid));
}

void BM_ValueGridSerial(benchmark::State& state) {
  auto inst = make_instance();
  auto grid = oracle::box_grid(inst.x_domain, 40);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::single_value_function_grid_serial(inst, grid));
}

void BM_BackwardPass(benchmark::State& state) {
  auto p = wide_problem(64);
  for (auto _ : state) {
    Solver s(p, ErrorSchedule::exact());
    for (int k = 1; k <= 5; ++k) s.backward_pass(k, s.forward_pass(k, 1).states);
  }
}

void BM_BackwardPassSerial(benchmark::State& state) {
  auto p = wide_problem(64);
  for (auto _ : state) {
    Solver s(p, ErrorSchedule::exact());
    for (int k = 1; k <= 5; ++k) s.backward_pass_serial(k, s.forward_pass(k, 1).states);
  }
}

}  // namespace

BENCHMARK(BM_PoolEval)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PoolEvalSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ValueGrid)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ValueGridSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackwardPass)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BackwardPassSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
