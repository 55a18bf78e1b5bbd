#pragma once

// Serial, loop-per-definition versions of the hot kernels. They are kept for
// testing the OpenMP kernels and as the baseline in bench_kernels; nothing
// in the training path calls them.

#include "emgtl/kernel.hpp"
#include "emgtl/signal.hpp"

namespace emgtl::reference {

template <typename Real>
Tensor<Real> conv1d_causal_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                   const Tensor<Real>& bias, std::size_t dilation);

template <typename Real>
struct ConvGrads {
  Tensor<Real> d_input, d_weight, d_bias;
};

template <typename Real>
ConvGrads<Real> conv1d_causal_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                       std::size_t dilation, const Tensor<Real>& d_output);

/// Training-mode batch norm (batch statistics, no running-stat update).
template <typename Real>
Tensor<Real> batch_norm_train_forward(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                      const Tensor<Real>& beta, double eps);

/// Direct-form I, section by section, one channel after another.
RawSignal filter_causal(const RawSignal& signal, const FilterCoefficients& coeffs);

}  // namespace emgtl::reference
