#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mot/kernels.hpp"
#include "mot/lp.hpp"
#include "support.hpp"

using namespace mot;
using testing::Rng;

namespace {

CsrMatrix random_csr(Rng& rng, std::size_t rows, std::size_t cols, double density) {
  CsrMatrix a;
  a.rows = rows;
  a.cols = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (testing::uniform(rng, 0, 1) < density) {
        a.indices.push_back(static_cast<std::uint32_t>(c));
        a.values.push_back(testing::uniform(rng, -2, 2));
      }
    }
    a.offsets.push_back(a.values.size());
  }
  return a;
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = testing::uniform(rng, -1, 1);
  return v;
}

}  // namespace

TEST_CASE("spmv: serial, omp and a dense product agree") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng() % 300, cols = 1 + rng() % 300;
    const auto a = random_csr(rng, rows, cols, 0.05);
    CHECK_NOTHROW(a.validate());
    const auto x = random_vector(rng, cols);
    std::vector<double> ys(rows), yp(rows), dense(rows, 0.0);
    kernels::serial::spmv(a, x, ys);
    kernels::omp::spmv(a, x, yp);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
        dense[r] += a.values[p] * x[a.indices[p]];
      }
    }
    CHECK(ys == yp);  // one writer per row, same summation order
    CHECK(ys == dense);
  }
}

TEST_CASE("transpose is an involution and matches dense transpose") {
  Rng rng(13);
  const auto a = random_csr(rng, 40, 70, 0.1);
  const auto at = transpose(a);
  CHECK(at.rows == 70);
  CHECK(at.cols == 40);
  CHECK_NOTHROW(at.validate());
  const auto att = transpose(at);
  CHECK(att.offsets == a.offsets);
  CHECK(att.indices == a.indices);
  CHECK(att.values == a.values);
  // y' (A x) == (A' y)' x
  const auto x = random_vector(rng, 70), y = random_vector(rng, 40);
  std::vector<double> ax(40), aty(70);
  kernels::serial::spmv(a, x, ax);
  kernels::serial::spmv(at, y, aty);
  CHECK(kernels::serial::dot(y, ax) == doctest::Approx(kernels::serial::dot(aty, x)).epsilon(1e-13));
}

TEST_CASE("dot and norm reductions") {
  Rng rng(14);
  for (std::size_t n : {0ul, 1ul, 100ul, 4096ul, 4097ul, 50'000ul}) {
    const auto a = random_vector(rng, n), b = random_vector(rng, n);
    const double s = kernels::serial::dot(a, b);
    const double p = kernels::omp::dot(a, b, true);
    const double q = kernels::omp::dot(a, b, false);
    CHECK(p == doctest::Approx(s).epsilon(1e-12));
    CHECK(q == doctest::Approx(s).epsilon(1e-12));
    // deterministic mode is reproducible bit for bit
    CHECK(kernels::omp::dot(a, b, true) == p);
    CHECK(kernels::omp::norm_inf(a) == kernels::serial::norm_inf(a));
  }
}

TEST_CASE("deterministic dot does not depend on the thread count") {
  Rng rng(15);
  const auto a = random_vector(rng, 100'000), b = random_vector(rng, 100'000);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const double one = kernels::omp::dot(a, b, true);
  omp_set_num_threads(std::max(2, saved));
  const double many = kernels::omp::dot(a, b, true);
  omp_set_num_threads(saved);
  CHECK(one == many);
}

TEST_CASE("path sweeps: fill and max agree across implementations") {
  Rng rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> dims(1 + rng() % 6);
    for (auto& d : dims) d = 1 + rng() % 7;
    const IndexMap map(dims);
    const auto weights = random_vector(rng, dims.size());
    auto f = [&](std::span<const std::size_t> idx, std::size_t flat) {
      double v = 0.0;
      for (std::size_t r = 0; r < idx.size(); ++r) v += weights[r] * std::sin(1.0 + idx[r]);
      return v + 1e-9 * static_cast<double>(flat % 3);
    };
    std::vector<double> s(map.size()), p(map.size());
    kernels::serial::fill_paths(map, f, std::span<double>(s));
    kernels::omp::fill_paths(map, f, std::span<double>(p));
    CHECK(s == p);
    const auto ms = kernels::serial::max_over_paths(map, f);
    const auto mp = kernels::omp::max_over_paths(map, f);
    CHECK(ms.value == mp.value);
    CHECK(ms.flat == mp.flat);
    CHECK(ms.value == *std::max_element(s.begin(), s.end()));
  }
}

TEST_CASE("max_over_paths breaks ties at the smallest flat index") {
  const IndexMap map({100, 100});
  auto f = [](std::span<const std::size_t> idx, std::size_t) {
    return idx[0] >= 50 ? 1.0 : 0.0;
  };
  CHECK(kernels::omp::max_over_paths(map, f).flat == 5000);
  CHECK(kernels::serial::max_over_paths(map, f).flat == 5000);
}

TEST_CASE("exceptions inside parallel sweeps propagate") {
  const IndexMap map({50, 200});
  auto f = [](std::span<const std::size_t>, std::size_t flat) -> double {
    if (flat == 7777) throw std::runtime_error("boom");
    return 0.0;
  };
  std::vector<double> out(map.size());
  CHECK_THROWS_AS(kernels::omp::fill_paths(map, f, std::span<double>(out)), std::runtime_error);
}

TEST_CASE("csr validation catches structural faults") {
  CsrMatrix a;
  a.rows = 1;
  a.cols = 2;
  a.indices = {1, 1};
  a.values = {1.0, 2.0};
  a.offsets = {0, 2};
  CHECK_THROWS(a.validate());
  a.indices = {0, 5};
  CHECK_THROWS(a.validate());
}
