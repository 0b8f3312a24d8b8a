#include "mot/kernels.hpp"

#include <numeric>
#include <string>

#include "mot/error.hpp"

namespace mot {

void CsrMatrix::validate() const {
  if (offsets.size() != rows + 1 || offsets.front() != 0 ||
      offsets.back() != values.size() || indices.size() != values.size()) {
    throw Error(Errc::DimensionMismatch, "inconsistent CSR arrays");
  }
  std::vector<std::size_t> seen(cols, static_cast<std::size_t>(-1));
  for (std::size_t r = 0; r < rows; ++r) {
    if (offsets[r + 1] < offsets[r]) {
      throw Error(Errc::DimensionMismatch, "offsets not monotone");
    }
    for (std::size_t p = offsets[r]; p < offsets[r + 1]; ++p) {
      const auto c = indices[p];
      if (c >= cols) {
        throw Error(Errc::DimensionMismatch,
                    "column " + std::to_string(c) + " out of range in row " +
                        std::to_string(r));
      }
      if (seen[c] == r) {
        throw Error(Errc::DimensionMismatch,
                    "duplicate column " + std::to_string(c) + " in row " +
                        std::to_string(r));
      }
      seen[c] = r;
    }
  }
}

CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t;
  t.rows = a.cols;
  t.cols = a.rows;
  t.offsets.assign(a.cols + 1, 0);
  for (auto c : a.indices) ++t.offsets[c + 1];
  std::partial_sum(t.offsets.begin(), t.offsets.end(), t.offsets.begin());
  t.indices.resize(a.nnz());
  t.values.resize(a.nnz());
  std::vector<std::size_t> fill(t.offsets.begin(), t.offsets.end() - 1);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      const auto q = fill[a.indices[p]]++;
      t.indices[q] = static_cast<std::uint32_t>(r);
      t.values[q] = a.values[p];
    }
  }
  return t;
}

namespace kernels {

namespace serial {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    double acc = 0.0;
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      acc += a.values[p] * x[a.indices[p]];
    }
    y[r] = acc;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace serial

namespace omp {

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      acc += a.values[p] * x[a.indices[p]];
    }
    y[r] = acc;
  }
}

double dot(std::span<const double> a, std::span<const double> b,
           bool deterministic) {
  const std::size_t n = a.size();
  if (!deterministic) {
    double acc = 0.0;
    const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (std::ptrdiff_t i = 0; i < sn; ++i) acc += a[i] * b[i];
    return acc;
  }
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  if (blocks <= 1) return serial::dot(a, b);
  std::vector<double> partial(blocks);
  const auto sb = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < sb; ++blk) {
    const std::size_t begin = static_cast<std::size_t>(blk) * kReductionBlock;
    const std::size_t end = std::min(n, begin + kReductionBlock);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += a[i] * b[i];
    partial[blk] = acc;
  }
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc;
}

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for reduction(max : m) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

}  // namespace omp

}  // namespace kernels

}  // namespace mot
