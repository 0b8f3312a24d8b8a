// Times the serial reference kernels against their OpenMP versions on the
// desk-scale LP (d = 2, three dates, five atoms per marginal) and on a
// larger grid.
//
//   bench_kernels [n_points] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "mot/kernels.hpp"
#include "mot/lp.hpp"
#include "mot/marginals.hpp"
#include "mot/payoff.hpp"

using Clock = std::chrono::steady_clock;

template <class F>
static double seconds_per_call(F&& f, int repeats) {
  f();  // warm-up
  const auto t0 = Clock::now();
  for (int r = 0; r < repeats; ++r) f();
  return std::chrono::duration<double>(Clock::now() - t0).count() / repeats;
}

static void row(const char* name, double serial, double parallel) {
  std::printf("%-22s serial %10.3f ms   omp %10.3f ms   speedup %5.2fx\n", name,
              serial * 1e3, parallel * 1e3, serial / parallel);
}

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 5;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 50;

  mot::SyntheticSpec spec;
  spec.times = {19.0 / 24.0, 43.0 / 24.0, 67.0 / 24.0};
  spec.volatilities = {0.2, 0.25};
  spec.n_points = n;
  const mot::MarginalSystem system = mot::lognormal_martingale_system(spec);

  mot::AutocallSpec ac;
  ac.observation_times = spec.times;
  ac.inception_time = -5.0 / 24.0;
  auto payoff = [&](std::span<const double> p) { return mot::worst_of_autocall(p, ac); };

  std::printf("threads=%d  grid points per marginal=%zu  repeats=%d\n",
              omp_get_max_threads(), n, repeats);

  const double cost_s = seconds_per_call(
      [&] { (void)mot::build_cost_tensor_serial(system, payoff, mot::Direction::Minimize); },
      repeats);
  const double cost_p = seconds_per_call(
      [&] { (void)mot::build_cost_tensor(system, payoff, mot::Direction::Minimize); }, repeats);
  row("cost tensor", cost_s, cost_p);

  const mot::CostTensor cost =
      mot::build_cost_tensor(system, payoff, mot::Direction::Minimize);
  const mot::LinearProgram lp = mot::build_lp(system, cost, mot::MartingaleMode::Exact);
  const mot::CsrMatrix at = mot::transpose(lp.matrix);
  std::printf("LP: %zu rows, %zu cols, %zu nonzeros\n", lp.n_rows(), lp.n_vars,
              lp.matrix.nnz());

  std::vector<double> x(lp.n_vars, 1.0), y(lp.n_rows(), 0.5);
  std::vector<double> ax(lp.n_rows()), aty(lp.n_vars);
  row("A x", seconds_per_call([&] { mot::kernels::serial::spmv(lp.matrix, x, ax); }, repeats),
      seconds_per_call([&] { mot::kernels::omp::spmv(lp.matrix, x, ax); }, repeats));
  row("A^T y", seconds_per_call([&] { mot::kernels::serial::spmv(at, y, aty); }, repeats),
      seconds_per_call([&] { mot::kernels::omp::spmv(at, y, aty); }, repeats));

  volatile double sink = 0.0;
  row("dot", seconds_per_call([&] { sink = mot::kernels::serial::dot(x, aty); }, repeats),
      seconds_per_call([&] { sink = mot::kernels::omp::dot(x, aty, true); }, repeats));
  row("norm_inf",
      seconds_per_call([&] { sink = mot::kernels::serial::norm_inf(aty); }, repeats),
      seconds_per_call([&] { sink = mot::kernels::omp::norm_inf(aty); }, repeats));

  auto f = [&](std::span<const std::size_t>, std::size_t flat) { return cost.values[flat]; };
  row("max over paths",
      seconds_per_call([&] { sink = mot::kernels::serial::max_over_paths(cost.index_map, f).value; },
                       repeats),
      seconds_per_call([&] { sink = mot::kernels::omp::max_over_paths(cost.index_map, f).value; },
                       repeats));
  (void)sink;
  return 0;
}
