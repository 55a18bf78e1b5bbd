#pragma once

// TCN gesture classifier with a two-unit domain head, and the two-network
// fusion assembly used for transfer to a new recording session.

#include <cstdint>
#include <string>
#include <vector>

#include "emgtl/kernel.hpp"

namespace emgtl {

struct TcnConfig {
  std::size_t in_channels = 10;
  std::size_t window_len = 150;
  std::vector<std::size_t> channels{128, 128, 128};  // one entry per block
  std::size_t kernel_size = 3;
  double dropout = 0.5;
  double leaky_slope = 0.1;
  std::size_t num_gestures = 11;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t num_blocks() const { return channels.size(); }
  /// Block i uses dilation 2^i.
  std::size_t dilation(std::size_t block) const { return std::size_t{1} << block; }
  std::size_t feature_width() const { return channels.back(); }
  /// 1 + (k - 1) * sum of dilations
  std::size_t receptive_field() const;
  void validate() const;

  /// Plain-text `key=value` lines; parse(to_text()) == *this.
  std::string to_text() const;
  static TcnConfig parse(const std::string& text);

  friend bool operator==(const TcnConfig&, const TcnConfig&) = default;
};

/// Closed-form learnable-parameter count of the classifier (conv, BN affine,
/// output layer; the domain head is excluded). For uniform width C and input
/// 10 / output 11 this is 2kC^2 + 10kC + 20C + 11.
std::size_t analytic_parameter_count(const TcnConfig& config);

enum class Phase {
  kTrain,               // dropout on, BN batch stats, running stats updated
  kTrainFrozenStats,    // dropout on, BN batch stats, running stats untouched
  kInference,           // dropout off, BN running stats
};

template <typename Real>
struct BlockTrace {
  Tensor<Real> input;
  kernel::BnCache<Real> bn;
  Tensor<Real> bn_out;
  Tensor<Real> dropout_mask;
};

template <typename Real>
struct FeatureTrace {
  std::vector<BlockTrace<Real>> blocks;
  std::vector<Tensor<Real>> block_outputs;  // post-dropout output of every block
  Tensor<Real> pooled;
};

template <typename Real>
class TcnModel {
 public:
  TcnModel() = default;
  /// Conv/linear weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); BN gamma 1, beta 0.
  TcnModel(TcnConfig config, std::uint64_t init_seed);

  const TcnConfig& config() const { return config_; }

  // BN banks (one DomainStats per block, all keyed identically)
  void add_domain(const std::string& key);
  bool has_domain(const std::string& key) const;
  std::vector<std::string> domains() const;
  kernel::DomainStats<Real>& bn_stats(std::size_t block) { return bn_stats_.at(block); }
  const kernel::DomainStats<Real>& bn_stats(std::size_t block) const {
    return bn_stats_.at(block);
  }

  /// Every parameter: blocks, output layer, domain head.
  std::vector<Parameter<Real>*> parameters();
  std::vector<const Parameter<Real>*> parameters() const;
  /// Blocks and output layer only.
  std::vector<Parameter<Real>*> classifier_parameters();
  Parameter<Real>& parameter(const std::string& name);
  const Parameter<Real>& parameter(const std::string& name) const;
  std::size_t classifier_parameter_count() const;
  void zero_grad();
  /// Marks every parameter except BN gamma/beta as non-trainable.
  void freeze_all_but_batch_norm();

  // --- block-level pieces, used directly by the fusion assembly ---
  Tensor<Real> block_forward(std::size_t block, const Tensor<Real>& input,
                             const std::string& key, Phase phase, kernel::Rng* rng,
                             BlockTrace<Real>* trace);
  Tensor<Real> block_inference(std::size_t block, const Tensor<Real>& input,
                               const std::string& key) const;
  /// Returns d(input); parameter gradients accumulate only for trainable parameters.
  Tensor<Real> block_backward(std::size_t block, const BlockTrace<Real>& trace,
                              const Tensor<Real>& d_output);

  // --- whole feature extractor ---
  /// [B, in_channels, window_len] -> pooled [B, feature_width].
  Tensor<Real> features(const Tensor<Real>& input, const std::string& key, Phase phase,
                        kernel::Rng* rng, FeatureTrace<Real>* trace);
  Tensor<Real> features_inference(const Tensor<Real>& input, const std::string& key) const;
  /// `extra_block_grads`, when non-empty, holds one gradient per block that is
  /// added at that block's output before back-propagating through it.
  Tensor<Real> backward_features(const FeatureTrace<Real>& trace, const Tensor<Real>& d_pooled,
                                 const std::vector<Tensor<Real>>& extra_block_grads = {});

  // --- heads ---
  Tensor<Real> classify_logits(const Tensor<Real>& pooled) const;
  Tensor<Real> classify_backward(const Tensor<Real>& pooled, const Tensor<Real>& d_logits);
  /// Reversal layer (identity forward) followed by the 2-unit domain head.
  Tensor<Real> domain_logits(const Tensor<Real>& pooled) const;
  /// Backward through the domain head, then the reversal layer (scale -lambda).
  Tensor<Real> domain_backward(const Tensor<Real>& pooled, const Tensor<Real>& d_logits,
                               double lambda);

  /// Convenience: features + classification head.
  Tensor<Real> forward_classify(const Tensor<Real>& input, const std::string& key, Phase phase,
                                kernel::Rng* rng);
  Tensor<Real> logits(const Tensor<Real>& input, const std::string& key) const;

 private:
  std::size_t block_param_index(std::size_t block) const { return block * 4; }
  std::size_t head_index() const { return config_.num_blocks() * 4; }
  void check_input(const Tensor<Real>& input) const;

  TcnConfig config_;
  std::vector<Parameter<Real>> params_;
  std::vector<kernel::DomainStats<Real>> bn_stats_;
};

template <typename Real>
struct TadannTrace {
  FeatureTrace<Real> source;
  std::vector<BlockTrace<Real>> target_blocks;
  Tensor<Real> fused_pooled;
};

/// A frozen pre-trained source network fused into a fresh target network:
/// after target block i, alpha_i * (source block i output) is added; the
/// pooled features receive alpha_last * (source pooled features).
template <typename Real>
class TadannModel {
 public:
  TadannModel() = default;
  TadannModel(TcnModel<Real> source, TcnModel<Real> target, std::string calibration_key);

  TcnModel<Real>& source() { return source_; }
  const TcnModel<Real>& source() const { return source_; }
  TcnModel<Real>& target() { return target_; }
  const TcnModel<Real>& target() const { return target_; }
  const std::string& calibration_key() const { return key_; }

  std::vector<Parameter<Real>>& coefficients() { return coefficients_; }
  const std::vector<Parameter<Real>>& coefficients() const { return coefficients_; }
  /// Projects every coefficient onto [0, 2].
  void clamp_coefficients();

  /// Target classifier, every source classifier parameter (non-BN ones are
  /// flagged non-trainable) and the fusion coefficients.
  std::vector<Parameter<Real>*> parameters();
  void zero_grad();

  Tensor<Real> forward(const Tensor<Real>& input, Phase phase, kernel::Rng* rng,
                       TadannTrace<Real>* trace);
  void backward(const TadannTrace<Real>& trace, const Tensor<Real>& d_logits);
  Tensor<Real> logits(const Tensor<Real>& input) const;

 private:
  Real alpha(std::size_t i) const { return coefficients_[i].value[0]; }

  TcnModel<Real> source_;
  TcnModel<Real> target_;
  std::string key_;
  std::vector<Parameter<Real>> coefficients_;
};

/// Freezes a copy of `source` (BN affine stays trainable), gives it a fresh
/// BN bank for `calibration_key`, and pairs it with a freshly initialised
/// target of `target_config`. Throws UsageError if the architectures differ.
template <typename Real>
TadannModel<Real> build_tadann(const TcnModel<Real>& source, const TcnConfig& target_config,
                               const std::string& calibration_key, std::uint64_t seed);

/// Row-wise argmax; ties go to the lowest index.
template <typename Real>
std::vector<int> argmax_rows(const Tensor<Real>& logits);

/// Label of a single [in_channels, window_len] window (inference mode).
template <typename Real>
int predict(const TcnModel<Real>& model, const Tensor<Real>& window, const std::string& key);

}  // namespace emgtl
