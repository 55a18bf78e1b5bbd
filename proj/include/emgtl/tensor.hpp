#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "emgtl/error.hpp"

namespace emgtl {

/// Dense row-major tensor. Values are owned; copies are deep.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0))
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<Real> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw UsageError("tensor: value count " + std::to_string(values_.size()) +
                       " does not match shape");
    }
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  Real* data() { return values_.data(); }
  const Real* data() const { return values_.data(); }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }

  Real& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  Real at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  Real& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  Real at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    for (Real v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<Real> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws NumericalFault naming `where` if any value is NaN/Inf.
template <typename Real>
void check_finite(const Tensor<Real>& t, const char* where) {
  if (!t.all_finite()) {
    throw NumericalFault(std::string("non-finite value produced by ") + where);
  }
}

/// A learnable tensor with its accumulated gradient and a stable identity.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<Real> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(Real(0)); }
};

}  // namespace emgtl
