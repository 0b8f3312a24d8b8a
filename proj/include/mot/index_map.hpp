#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mot {

/// Row-major flattening of the multi-index (i_{1,1}, ..., i_{T,d}); the
/// last coordinate varies fastest.
class IndexMap {
 public:
  IndexMap() = default;
  explicit IndexMap(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return size_; }
  std::span<const std::size_t> dims() const { return dims_; }
  std::span<const std::size_t> strides() const { return strides_; }

  /// Throws Errc::OutOfRange for an invalid multi-index.
  std::size_t flatten(std::span<const std::size_t> idx) const;
  void unflatten(std::size_t flat, std::span<std::size_t> idx) const;

  /// Number of cells spanned by the first `prefix` coordinates.
  std::size_t prefix_size(std::size_t prefix) const;

  /// Odometer increment; returns false after the last index.
  bool next(std::span<std::size_t> idx) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace mot
