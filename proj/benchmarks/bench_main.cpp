#include <benchmark/benchmark.h>

#include "fsipl/composite.hpp"
#include "fsipl/dual_subproblem.hpp"
#include "fsipl/harness.hpp"
#include "fsipl/manifold.hpp"
#include "fsipl/rng.hpp"
#include "fsipl/solver.hpp"

namespace {

using namespace fsipl;

void bm_prox(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(1);
  CompositeProblem prob = spca_instance(rng.gaussian(8, n), 0.5, 0.3, 4);
  Eigen::MatrixXd z = rng.gaussian(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(prob.g_prox(0.3, z));
  state.SetItemsProcessed(state.iterations() * n * 4);
}
BENCHMARK(bm_prox)->Arg(100)->Arg(1000)->Arg(10000);

void bm_constraint(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  ManifoldSpec man = ManifoldSpec::stiefel(n, 5);
  Rng rng(2);
  Eigen::MatrixXd x = man.project_to_manifold(rng.gaussian(n, 5));
  for (auto _ : state) benchmark::DoNotOptimize(man.constraint_value(x));
}
BENCHMARK(bm_constraint)->Arg(100)->Arg(1000);

void bm_projection(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  ManifoldSpec man = ManifoldSpec::stiefel(n, 5);
  Rng rng(3);
  Eigen::MatrixXd y =
      man.project_to_manifold(rng.gaussian(n, 5)) + 0.1 * rng.gaussian(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(man.project_to_manifold(y));
}
BENCHMARK(bm_projection)->Arg(100)->Arg(1000);

void bm_dual_solve(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  Rng rng(4);
  CompositeProblem prob = spca_instance(gen_spca_data(50, n, 1), 0.5, 0.3, 5);
  ManifoldSpec man = ManifoldSpec::stiefel(n, 5);
  Eigen::MatrixXd x = random_orthonormal(n, 5, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_identity_shortcut(prob, man, x, 0.2, 1e-6));
}
BENCHMARK(bm_dual_solve)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void bm_small_solve(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  CompositeProblem prob = spca_instance(gen_spca_data(20, n, 1), 0.5, 0.3, 2);
  ManifoldSpec man = ManifoldSpec::stiefel(n, 2);
  SolverConfig cfg = SolverConfig::spca_defaults(prob, man);
  Eigen::MatrixXd x0 = random_orthonormal(n, 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(solve(prob, man, cfg, x0));
}
BENCHMARK(bm_small_solve)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
