#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "smartposer/error.hpp"
#include "smartposer/matrix.hpp"

namespace smartposer {

// Dense row-major tensor. data().size() always equals the product of dims().
// Storage is aligned to Eigen's maximum alignment: Eigen picks vectorized
// code paths from the runtime address, and unaligned storage would make
// results depend on where the heap placed the buffer.
template <typename T>
class BasicTensor {
 public:
  using Dims = std::vector<std::uint32_t>;

  BasicTensor() = default;

  explicit BasicTensor(Dims dims) : dims_(std::move(dims)), data_(element_count(dims_), T{0}) {}

  BasicTensor(Dims dims, const std::vector<T>& data)
      : dims_(std::move(dims)), data_(data.begin(), data.end()) {
    if (data_.size() != element_count(dims_)) {
      throw InvalidInput("BasicTensor: data length does not match dims");
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  std::uint32_t dim(std::size_t i) const { return dims_.at(i); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 tensors map to (dims[0] x dims[1]); rank-1 to a column vector.
  Eigen::Map<Matrix<T>> matrix() {
    return Eigen::Map<Matrix<T>>(data_.data(), rows(), cols());
  }
  Eigen::Map<const Matrix<T>> matrix() const {
    return Eigen::Map<const Matrix<T>>(data_.data(), rows(), cols());
  }
  Eigen::Map<ColVector<T>> vector() { return Eigen::Map<ColVector<T>>(data_.data(), static_cast<Eigen::Index>(size())); }
  Eigen::Map<const ColVector<T>> vector() const {
    return Eigen::Map<const ColVector<T>>(data_.data(), static_cast<Eigen::Index>(size()));
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const BasicTensor&) const = default;

  static std::size_t element_count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t d) { return a * d; });
  }

 private:
  Eigen::Index rows() const { return dims_.empty() ? 0 : static_cast<Eigen::Index>(dims_[0]); }
  Eigen::Index cols() const { return dims_.size() >= 2 ? static_cast<Eigen::Index>(dims_[1]) : 1; }

  Dims dims_;
  std::vector<T, Eigen::aligned_allocator<T>> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace smartposer
