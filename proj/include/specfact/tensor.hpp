// specfact/tensor.hpp
//
// Copyright 2026 The specfact Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPECFACT_TENSOR_HPP
#define SPECFACT_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "specfact/common.hpp"
#include "specfact/rng.hpp"

namespace specfact {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major array of 64-bit floats. Rank 0 (empty shape) is a scalar.
// Dimensions must be positive and every element finite; NaN/Inf are rejected
// at construction. Mutation after construction goes through data_mut(), used
// by the optimizer, which re-validates on its own schedule.
class Tensor {
 public:
  Tensor() : shape_(), data_(1, 0.0) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    for (int64_t d : shape_) {
      if (d <= 0) throw_validation("Tensor: non-positive dimension in shape ", shape_str(shape_));
    }
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
      throw_validation("Tensor: shape ", shape_str(shape_), " does not match data length ",
                       data_.size());
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw_numerical("Tensor: non-finite element at construction");
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  static Tensor zeros(Shape shape) {
    int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
  }

  static Tensor full(Shape shape, double v) {
    int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
  }

  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(data));
  }

  static Tensor normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0) {
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (auto& v : data) v = rng.normal(mean, stddev);
    return Tensor(std::move(shape), std::move(data));
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  bool is_scalar() const { return shape_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data_mut() { return data_; }

  double item() const {
    if (numel() != 1) throw_validation("Tensor::item on non-scalar shape ", shape_str(shape_));
    return data_[0];
  }

  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-2 element access.
  double at(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
  }
  double& at_mut(int64_t r, int64_t c) {
    return data_[static_cast<size_t>(r * shape_[1] + c)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace specfact

#endif  // SPECFACT_TENSOR_HPP
