#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "insmt/errors.hpp"

namespace insmt {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// Dense row-major array. Scalars are stored with shape {1}.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(shape_size(shape_), T{0});
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                           " values but shape " + shape_string(shape_) + " needs " +
                           std::to_string(shape_size(shape_)));
    }
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  static Tensor vector(std::initializer_list<T> values) {
    return Tensor({static_cast<int>(values.size())}, std::vector<T>(values));
  }

  static Tensor vector(std::vector<T> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(int rows, int cols, std::initializer_list<T> values) {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  static Tensor filled(Shape shape, T value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  int last_dim() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int row, int col) { return data_[static_cast<std::size_t>(row) * shape_.back() + col]; }
  const T& at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * shape_.back() + col];
  }

  T item() const {
    if (data_.size() != 1) {
      throw ContractViolation("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_dims() const {
    for (int d : shape_) {
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace insmt
