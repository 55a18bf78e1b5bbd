#pragma once

// Forward/backward kernels for the closed set of layers used by the TCN,
// the domain head and the two-network fusion. Backward functions accumulate
// (+=) into parameter gradients so that several forward passes can share
// one optimizer step. Every function here is instantiated for float and
// double.
//
// Loops parallelised with OpenMP write each output element from exactly one
// thread with a fixed inner summation order, so results do not depend on
// the thread count.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emgtl/tensor.hpp"

namespace emgtl::kernel {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of the generator.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// --- dilated causal 1-D convolution -----------------------------------------
//
// input [B, Cin, T], weight [Cout, Cin, K], bias [Cout] -> output [B, Cout, T].
// The input is implicitly left-padded with (K-1)*dilation zeros, so
//   out[b,o,t] = bias[o] + sum_{i,j} w[o,i,j] * in[b,i, t - (K-1-j)*dilation].

template <typename Real>
Tensor<Real> conv1d_causal_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                   const Tensor<Real>& bias, std::size_t dilation);

/// Returns d(input). Adds into `d_weight` / `d_bias` when they are non-null.
template <typename Real>
Tensor<Real> conv1d_causal_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                    std::size_t dilation, const Tensor<Real>& d_output,
                                    Tensor<Real>* d_weight, Tensor<Real>* d_bias);

// --- batch normalisation with per-domain running statistics -----------------

template <typename Real>
struct RunningStats {
  std::vector<Real> mean;
  std::vector<Real> var;

  friend bool operator==(const RunningStats&, const RunningStats&) = default;
};

/// A bank of running statistics per domain (recording session) for one BN layer.
template <typename Real>
class DomainStats {
 public:
  DomainStats() = default;
  explicit DomainStats(std::size_t channels) : channels_(channels) {}

  std::size_t channels() const { return channels_; }

  /// Adds a fresh bank (mean 0, var 1). No-op if the key already exists.
  void add(const std::string& key);
  bool contains(const std::string& key) const { return banks_.count(key) != 0; }
  RunningStats<Real>& at(const std::string& key);
  const RunningStats<Real>& at(const std::string& key) const;
  std::vector<std::string> keys() const;
  void erase(const std::string& key) { banks_.erase(key); }
  const std::map<std::string, RunningStats<Real>>& banks() const { return banks_; }
  std::map<std::string, RunningStats<Real>>& banks() { return banks_; }

  friend bool operator==(const DomainStats&, const DomainStats&) = default;

 private:
  std::size_t channels_ = 0;
  std::map<std::string, RunningStats<Real>> banks_;
};

enum class BnMode {
  kTrain,          // batch statistics; selected bank updated by EMA
  kTrainNoUpdate,  // batch statistics; bank left untouched
  kInference,      // normalise by the selected bank
};

struct BnOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

template <typename Real>
struct BnCache {
  Tensor<Real> normalized;       // x_hat, [B, C, T]
  std::vector<Real> inv_std;     // per channel
  bool batch_statistics = true;  // false in inference mode
};

/// input [B, C, T]; gamma, beta [C]. Throws UsageError for an unknown domain key.
template <typename Real>
Tensor<Real> batch_norm_forward(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                const Tensor<Real>& beta, DomainStats<Real>& stats,
                                const std::string& key, BnMode mode, const BnOptions& options,
                                BnCache<Real>* cache);

/// Inference-mode normalisation by fixed running statistics; never mutates.
template <typename Real>
Tensor<Real> batch_norm_inference(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                  const Tensor<Real>& beta, const RunningStats<Real>& stats,
                                  double eps);

template <typename Real>
Tensor<Real> batch_norm_backward(const BnCache<Real>& cache, const Tensor<Real>& gamma,
                                 const Tensor<Real>& d_output, Tensor<Real>* d_gamma,
                                 Tensor<Real>* d_beta);

// --- pointwise and pooling --------------------------------------------------

template <typename Real>
Tensor<Real> leaky_relu_forward(const Tensor<Real>& input, Real slope);

template <typename Real>
Tensor<Real> leaky_relu_backward(const Tensor<Real>& input, Real slope,
                                 const Tensor<Real>& d_output);

/// Inverted dropout. `mask` receives the per-element scale (0 or 1/(1-rate)).
/// When `training` is false this is the identity and `mask` is left empty.
template <typename Real>
Tensor<Real> dropout_forward(const Tensor<Real>& input, double rate, bool training, Rng* rng,
                             Tensor<Real>* mask);

template <typename Real>
Tensor<Real> dropout_backward(const Tensor<Real>& mask, const Tensor<Real>& d_output);

/// [B, C, T] -> [B, C]
template <typename Real>
Tensor<Real> global_avg_pool_forward(const Tensor<Real>& input);

template <typename Real>
Tensor<Real> global_avg_pool_backward(const Tensor<Real>& d_output, std::size_t length);

/// input [B, In], weight [Out, In], bias [Out] -> [B, Out]
template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                            const Tensor<Real>& bias);

template <typename Real>
Tensor<Real> linear_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                             const Tensor<Real>& d_output, Tensor<Real>* d_weight,
                             Tensor<Real>* d_bias);

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& logits);

template <typename Real>
struct LossResult {
  double loss = 0.0;          // mean over the batch
  Tensor<Real> d_logits;      // gradient of the mean loss
};

/// Mean softmax cross-entropy. Throws UsageError for a label outside [0, classes).
template <typename Real>
LossResult<Real> softmax_cross_entropy(const Tensor<Real>& logits, std::span<const int> labels);

// --- adversarial and fusion plumbing ---------------------------------------

/// Identity on the forward pass.
template <typename Real>
Tensor<Real> gradient_reversal_forward(const Tensor<Real>& input) {
  return input;
}

/// Multiplies the incoming gradient by -lambda.
template <typename Real>
Tensor<Real> gradient_reversal_backward(const Tensor<Real>& d_output, double lambda);

/// target + alpha * source, elementwise.
template <typename Real>
Tensor<Real> scaled_add_forward(const Tensor<Real>& target, const Tensor<Real>& source,
                                Real alpha);

/// Returns d(source); d(target) is d_output itself. Adds sum(d_output * source) into *d_alpha.
template <typename Real>
Tensor<Real> scaled_add_backward(const Tensor<Real>& source, Real alpha,
                                 const Tensor<Real>& d_output, Real* d_alpha);

/// Projection of a fusion coefficient onto [0, 2].
double clamp_coefficient(double value);

}  // namespace emgtl::kernel
