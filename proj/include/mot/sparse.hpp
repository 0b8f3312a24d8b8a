#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mot {

/// Compressed sparse row storage. Column indices are 32-bit; the largest
/// instances we assemble have ~10^6 columns.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  std::size_t row_size(std::size_t r) const { return offsets[r + 1] - offsets[r]; }

  /// Checks offsets, bounds and duplicate columns; throws DimensionMismatch.
  void validate() const;
};

CsrMatrix transpose(const CsrMatrix& a);

}  // namespace mot
