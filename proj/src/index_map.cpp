#include "mot/index_map.hpp"

#include <string>

#include "mot/error.hpp"

namespace mot {

IndexMap::IndexMap(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), strides_(dims_.size()) {
  size_ = 1;
  for (std::size_t r = dims_.size(); r-- > 0;) {
    if (dims_[r] == 0) throw Error(Errc::OutOfRange, "zero-length dimension");
    strides_[r] = size_;
    size_ *= dims_[r];
  }
}

std::size_t IndexMap::flatten(std::span<const std::size_t> idx) const {
  if (idx.size() != dims_.size()) {
    throw Error(Errc::OutOfRange, "multi-index rank mismatch");
  }
  std::size_t flat = 0;
  for (std::size_t r = 0; r < dims_.size(); ++r) {
    if (idx[r] >= dims_[r]) {
      throw Error(Errc::OutOfRange, "coordinate " + std::to_string(r) + " = " +
                                        std::to_string(idx[r]) + " >= " +
                                        std::to_string(dims_[r]));
    }
    flat += idx[r] * strides_[r];
  }
  return flat;
}

void IndexMap::unflatten(std::size_t flat, std::span<std::size_t> idx) const {
  if (flat >= size_ || idx.size() != dims_.size()) {
    throw Error(Errc::OutOfRange, "flat index " + std::to_string(flat));
  }
  for (std::size_t r = 0; r < dims_.size(); ++r) {
    idx[r] = flat / strides_[r];
    flat -= idx[r] * strides_[r];
  }
}

std::size_t IndexMap::prefix_size(std::size_t prefix) const {
  std::size_t n = 1;
  for (std::size_t r = 0; r < prefix; ++r) n *= dims_[r];
  return n;
}

bool IndexMap::next(std::span<std::size_t> idx) const {
  for (std::size_t r = dims_.size(); r-- > 0;) {
    if (++idx[r] < dims_[r]) return true;
    idx[r] = 0;
  }
  return false;
}

}  // namespace mot
