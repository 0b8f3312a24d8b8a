#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference in
// `kernels::serial` and an OpenMP version in `kernels::omp`; tests compare
// the two and bench/bench_kernels times them.
//
// Reductions in `omp` take a `deterministic` flag. When set, partial sums
// are formed over fixed-size blocks and combined in block order, so the
// result does not depend on the thread count.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <vector>

#include "mot/index_map.hpp"
#include "mot/sparse.hpp"

namespace mot::kernels {

inline constexpr std::size_t kReductionBlock = 4096;
inline constexpr std::size_t kPathChunk = 4096;

struct PathMax {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t flat = 0;
};

namespace serial {

/// y = A x
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> a);

/// out[flat] = f(idx, flat) for every multi-index in order.
template <class F>
void fill_paths(const IndexMap& map, F&& f, std::span<double> out) {
  std::vector<std::size_t> idx(map.rank(), 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    out[flat] = f(std::span<const std::size_t>(idx), flat);
    map.next(idx);
  }
}

/// Maximum of f over all paths; ties resolve to the smallest flat index.
template <class F>
PathMax max_over_paths(const IndexMap& map, F&& f) {
  PathMax best;
  std::vector<std::size_t> idx(map.rank(), 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    const double v = f(std::span<const std::size_t>(idx), flat);
    if (v > best.value) best = {v, flat};
    map.next(idx);
  }
  return best;
}

}  // namespace serial

namespace omp {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b,
           bool deterministic = true);
double norm_inf(std::span<const double> a);

namespace detail {

template <class Body>
void for_each_chunk(const IndexMap& map, Body&& body) {
  const std::size_t n = map.size();
  const std::size_t chunks = (n + kPathChunk - 1) / kPathChunk;
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel
  {
    std::vector<std::size_t> idx(map.rank());
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      try {
        const std::size_t begin = c * kPathChunk;
        const std::size_t end = std::min(n, begin + kPathChunk);
        map.unflatten(begin, idx);
        body(c, begin, end, idx);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

template <class F>
void fill_paths(const IndexMap& map, F&& f, std::span<double> out) {
  detail::for_each_chunk(map, [&](std::size_t, std::size_t begin, std::size_t end,
                                  std::vector<std::size_t>& idx) {
    for (std::size_t flat = begin; flat < end; ++flat) {
      out[flat] = f(std::span<const std::size_t>(idx), flat);
      map.next(idx);
    }
  });
}

template <class F>
PathMax max_over_paths(const IndexMap& map, F&& f) {
  const std::size_t chunks = (map.size() + kPathChunk - 1) / kPathChunk;
  std::vector<PathMax> partial(chunks);
  detail::for_each_chunk(map, [&](std::size_t c, std::size_t begin, std::size_t end,
                                  std::vector<std::size_t>& idx) {
    PathMax best;
    for (std::size_t flat = begin; flat < end; ++flat) {
      const double v = f(std::span<const std::size_t>(idx), flat);
      if (v > best.value) best = {v, flat};
      map.next(idx);
    }
    partial[c] = best;
  });
  PathMax best;
  for (const auto& p : partial) {
    if (p.value > best.value) best = p;
  }
  return best;
}

}  // namespace omp

}  // namespace mot::kernels
