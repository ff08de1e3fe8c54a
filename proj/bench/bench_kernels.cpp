// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <vector>

#include "ccvolt/normal.hpp"
#include "kernels/sov.hpp"

namespace {

using ccvolt::Matrix;
using ccvolt::Vector;
using ccvolt::kernels::SovProblem;

constexpr int kReplicates = 12;

// Equicorrelated (rho = 0.5) standard normals in the box [-1, 1.5]^n.
SovProblem make_problem(int n) {
  Matrix c = Matrix::Constant(n, n, 0.5);
  c.diagonal().setOnes();
  const Matrix l = c.llt().matrixL();
  return SovProblem{n, l, Vector::Constant(n, -1.0), Vector::Constant(n, 1.5)};
}

std::vector<double> make_shifts(int n) {
  std::vector<double> shifts(static_cast<std::size_t>(kReplicates * (n - 1)));
  for (std::size_t i = 0; i < shifts.size(); ++i) shifts[i] = ccvolt::normal::counter_uniform(7, i);
  return shifts;
}

template <auto Kernel>
void lattice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::int64_t points = state.range(1);
  const SovProblem p = make_problem(n);
  const std::vector<double> shifts = make_shifts(n);
  std::vector<double> sums(kReplicates);
  for (auto _ : state) {
    std::fill(sums.begin(), sums.end(), 0.0);
    Kernel(p, shifts, kReplicates, 0, points, sums);
    benchmark::DoNotOptimize(sums.data());
  }
  state.SetItemsProcessed(state.iterations() * points * kReplicates);
}

template <auto Kernel>
void monte_carlo(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::int64_t draws = state.range(1);
  const SovProblem p = make_problem(n);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(p.chol, p.a, p.b, draws, 11));
  state.SetItemsProcessed(state.iterations() * draws);
}

void lattice_args(benchmark::internal::Benchmark* b) {
  for (int n : {4, 8, 13}) b->Args({n, 4096});
}
void mc_args(benchmark::internal::Benchmark* b) {
  for (int n : {4, 13}) b->Args({n, 100000});
}

}  // namespace

BENCHMARK(lattice<ccvolt::kernels::qmc_sums_serial>)->Name("lattice/serial")->Apply(lattice_args)->UseRealTime();
BENCHMARK(lattice<ccvolt::kernels::qmc_sums_omp>)->Name("lattice/openmp")->Apply(lattice_args)->UseRealTime();
BENCHMARK(monte_carlo<ccvolt::kernels::mc_count_serial>)->Name("mc/serial")->Apply(mc_args)->UseRealTime();
BENCHMARK(monte_carlo<ccvolt::kernels::mc_count_omp>)->Name("mc/openmp")->Apply(mc_args)->UseRealTime();

BENCHMARK_MAIN();
