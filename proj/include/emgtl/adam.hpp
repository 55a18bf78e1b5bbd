#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "emgtl/tensor.hpp"

namespace emgtl {

struct AdamOptions {
  double lr = 0.002233;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moments are keyed by parameter name and created lazily.
template <typename Real>
class Adam {
 public:
  struct Moments {
    Tensor<Real> first;
    Tensor<Real> second;
  };

  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One update of every trainable parameter from its current gradient.
  /// Parameters with trainable == false are not touched.
  void step(std::span<Parameter<Real>* const> params);

  double lr() const { return options_.lr; }
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }
  std::int64_t step_count() const { return steps_; }

  const std::map<std::string, Moments>& moments() const { return moments_; }
  /// Used when restoring from a checkpoint.
  void restore(std::int64_t steps, std::map<std::string, Moments> moments) {
    steps_ = steps;
    moments_ = std::move(moments);
  }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace emgtl
