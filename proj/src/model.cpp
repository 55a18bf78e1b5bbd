#include "emgtl/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace emgtl {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

kernel::BnMode bn_mode(Phase phase) {
  switch (phase) {
    case Phase::kTrain: return kernel::BnMode::kTrain;
    case Phase::kTrainFrozenStats: return kernel::BnMode::kTrainNoUpdate;
    case Phase::kInference: return kernel::BnMode::kInference;
  }
  return kernel::BnMode::kInference;
}

}  // namespace

// --- config -------------------------------------------------------------------

std::size_t TcnConfig::receptive_field() const {
  std::size_t sum = 0;
  for (std::size_t i = 0; i < num_blocks(); ++i) sum += dilation(i);
  return 1 + (kernel_size - 1) * sum;
}

void TcnConfig::validate() const {
  if (in_channels == 0 || window_len == 0) throw UsageError("tcn config: empty input shape");
  if (channels.empty()) throw UsageError("tcn config: need at least one block");
  for (std::size_t c : channels) {
    if (c == 0) throw UsageError("tcn config: zero-width block");
  }
  if (kernel_size == 0) throw UsageError("tcn config: kernel_size must be positive");
  if (num_gestures < 2) throw UsageError("tcn config: need at least two gestures");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("tcn config: dropout must lie in [0, 1)");
  if (!(bn_eps > 0.0) || bn_momentum < 0.0 || bn_momentum > 1.0) {
    throw UsageError("tcn config: invalid batch-norm settings");
  }
}

std::string TcnConfig::to_text() const {
  std::ostringstream os;
  os << "in_channels=" << in_channels << "\n";
  os << "window_len=" << window_len << "\n";
  os << "channels=";
  for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channels[i];
  os << "\n";
  os << "kernel_size=" << kernel_size << "\n";
  os << "dropout=" << format_double(dropout) << "\n";
  os << "leaky_slope=" << format_double(leaky_slope) << "\n";
  os << "num_gestures=" << num_gestures << "\n";
  os << "bn_momentum=" << format_double(bn_momentum) << "\n";
  os << "bn_eps=" << format_double(bn_eps) << "\n";
  return os.str();
}

TcnConfig TcnConfig::parse(const std::string& text) {
  TcnConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("tcn config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "in_channels") cfg.in_channels = std::stoul(value);
      else if (key == "window_len") cfg.window_len = std::stoul(value);
      else if (key == "kernel_size") cfg.kernel_size = std::stoul(value);
      else if (key == "num_gestures") cfg.num_gestures = std::stoul(value);
      else if (key == "dropout") cfg.dropout = std::stod(value);
      else if (key == "leaky_slope") cfg.leaky_slope = std::stod(value);
      else if (key == "bn_momentum") cfg.bn_momentum = std::stod(value);
      else if (key == "bn_eps") cfg.bn_eps = std::stod(value);
      else if (key == "channels") {
        cfg.channels.clear();
        std::istringstream cs(value);
        std::string item;
        while (std::getline(cs, item, ',')) cfg.channels.push_back(std::stoul(item));
      } else {
        throw DataError("tcn config: unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw DataError("tcn config: bad value for '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::size_t analytic_parameter_count(const TcnConfig& config) {
  std::size_t total = 0, prev = config.in_channels;
  for (std::size_t c : config.channels) {
    total += config.kernel_size * prev * c + c + 2 * c;  // conv weight + bias + BN affine
    prev = c;
  }
  total += prev * config.num_gestures + config.num_gestures;
  return total;
}

// --- TcnModel -----------------------------------------------------------------

template <typename Real>
TcnModel<Real>::TcnModel(TcnConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  kernel::Rng rng(init_seed);
  auto uniform_tensor = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor<Real> t(std::move(shape));
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = Real((2.0 * kernel::uniform01(rng) - 1.0) * bound);
    }
    return t;
  };
  std::size_t prev = config_.in_channels;
  const std::size_t k = config_.kernel_size;
  for (std::size_t b = 0; b < config_.num_blocks(); ++b) {
    const std::size_t c = config_.channels[b];
    const std::string p = "block" + std::to_string(b) + ".";
    params_.emplace_back(p + "conv.weight", uniform_tensor({c, prev, k}, prev * k));
    params_.emplace_back(p + "conv.bias", uniform_tensor({c}, prev * k));
    params_.emplace_back(p + "bn.gamma", Tensor<Real>({c}, Real(1)));
    params_.emplace_back(p + "bn.beta", Tensor<Real>({c}, Real(0)));
    bn_stats_.emplace_back(c);
    prev = c;
  }
  params_.emplace_back("output.weight", uniform_tensor({config_.num_gestures, prev}, prev));
  params_.emplace_back("output.bias", uniform_tensor({config_.num_gestures}, prev));
  params_.emplace_back("domain.weight", uniform_tensor({2, prev}, prev));
  params_.emplace_back("domain.bias", uniform_tensor({2}, prev));
}

template <typename Real>
void TcnModel<Real>::add_domain(const std::string& key) {
  for (auto& s : bn_stats_) s.add(key);
}

template <typename Real>
bool TcnModel<Real>::has_domain(const std::string& key) const {
  return !bn_stats_.empty() && bn_stats_.front().contains(key);
}

template <typename Real>
std::vector<std::string> TcnModel<Real>::domains() const {
  return bn_stats_.empty() ? std::vector<std::string>{} : bn_stats_.front().keys();
}

template <typename Real>
std::vector<Parameter<Real>*> TcnModel<Real>::parameters() {
  std::vector<Parameter<Real>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename Real>
std::vector<const Parameter<Real>*> TcnModel<Real>::parameters() const {
  std::vector<const Parameter<Real>*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename Real>
std::vector<Parameter<Real>*> TcnModel<Real>::classifier_parameters() {
  std::vector<Parameter<Real>*> out;
  for (std::size_t i = 0; i < head_index() + 2; ++i) out.push_back(&params_[i]);
  return out;
}

template <typename Real>
Parameter<Real>& TcnModel<Real>::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw UsageError("tcn: no parameter named '" + name + "'");
}

template <typename Real>
const Parameter<Real>& TcnModel<Real>::parameter(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw UsageError("tcn: no parameter named '" + name + "'");
}

template <typename Real>
std::size_t TcnModel<Real>::classifier_parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < head_index() + 2; ++i) n += params_[i].value.size();
  return n;
}

template <typename Real>
void TcnModel<Real>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename Real>
void TcnModel<Real>::freeze_all_but_batch_norm() {
  for (auto& p : params_) {
    const bool is_bn = p.name.find(".bn.") != std::string::npos;
    p.trainable = is_bn;
  }
}

template <typename Real>
void TcnModel<Real>::check_input(const Tensor<Real>& input) const {
  if (input.rank() != 3 || input.dim(1) != config_.in_channels || input.dim(0) == 0) {
    throw UsageError("tcn: expected input [B, " + std::to_string(config_.in_channels) +
                     ", T], got " + shape_string(input.shape()));
  }
}

template <typename Real>
Tensor<Real> TcnModel<Real>::block_forward(std::size_t block, const Tensor<Real>& input,
                                           const std::string& key, Phase phase,
                                           kernel::Rng* rng, BlockTrace<Real>* trace) {
  if (phase == Phase::kInference) return block_inference(block, input, key);
  const std::size_t base = block_param_index(block);
  const auto& w = params_[base].value;
  const auto& bias = params_[base + 1].value;
  const auto& gamma = params_[base + 2].value;
  const auto& beta = params_[base + 3].value;
  const kernel::BnOptions bn{config_.bn_momentum, config_.bn_eps};
  const Real slope = Real(config_.leaky_slope);

  Tensor<Real> conv = kernel::conv1d_causal_forward(input, w, bias, config_.dilation(block));
  kernel::BnCache<Real> cache;
  Tensor<Real> normed = kernel::batch_norm_forward(conv, gamma, beta, bn_stats_[block], key,
                                                   bn_mode(phase), bn, trace ? &cache : nullptr);
  Tensor<Real> act = kernel::leaky_relu_forward(normed, slope);
  Tensor<Real> mask;
  Tensor<Real> out = kernel::dropout_forward(act, config_.dropout, true, rng, &mask);
  if (trace) {
    trace->input = input;
    trace->bn = std::move(cache);
    trace->bn_out = std::move(normed);
    trace->dropout_mask = std::move(mask);
  }
  return out;
}

template <typename Real>
Tensor<Real> TcnModel<Real>::block_inference(std::size_t block, const Tensor<Real>& input,
                                             const std::string& key) const {
  const std::size_t base = block_param_index(block);
  Tensor<Real> conv = kernel::conv1d_causal_forward(input, params_[base].value,
                                                    params_[base + 1].value,
                                                    config_.dilation(block));
  Tensor<Real> normed =
      kernel::batch_norm_inference(conv, params_[base + 2].value, params_[base + 3].value,
                                   bn_stats_[block].at(key), config_.bn_eps);
  return kernel::leaky_relu_forward(normed, Real(config_.leaky_slope));
}

template <typename Real>
Tensor<Real> TcnModel<Real>::block_backward(std::size_t block, const BlockTrace<Real>& trace,
                                            const Tensor<Real>& d_output) {
  const std::size_t base = block_param_index(block);
  Parameter<Real>& w = params_[base];
  Parameter<Real>& bias = params_[base + 1];
  Parameter<Real>& gamma = params_[base + 2];
  Parameter<Real>& beta = params_[base + 3];
  Tensor<Real> d = kernel::dropout_backward(trace.dropout_mask, d_output);
  d = kernel::leaky_relu_backward(trace.bn_out, Real(config_.leaky_slope), d);
  d = kernel::batch_norm_backward(trace.bn, gamma.value, d,
                                  gamma.trainable ? &gamma.grad : nullptr,
                                  beta.trainable ? &beta.grad : nullptr);
  return kernel::conv1d_causal_backward(trace.input, w.value, config_.dilation(block), d,
                                        w.trainable ? &w.grad : nullptr,
                                        bias.trainable ? &bias.grad : nullptr);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::features(const Tensor<Real>& input, const std::string& key,
                                      Phase phase, kernel::Rng* rng, FeatureTrace<Real>* trace) {
  check_input(input);
  if (phase == Phase::kInference && !trace) return features_inference(input, key);
  if (trace) {
    trace->blocks.assign(config_.num_blocks(), {});
    trace->block_outputs.clear();
  }
  Tensor<Real> h = input;
  for (std::size_t b = 0; b < config_.num_blocks(); ++b) {
    h = block_forward(b, h, key, phase, rng, trace ? &trace->blocks[b] : nullptr);
    if (trace) trace->block_outputs.push_back(h);
  }
  Tensor<Real> pooled = kernel::global_avg_pool_forward(h);
  if (trace) trace->pooled = pooled;
  return pooled;
}

template <typename Real>
Tensor<Real> TcnModel<Real>::features_inference(const Tensor<Real>& input,
                                                const std::string& key) const {
  check_input(input);
  Tensor<Real> h = input;
  for (std::size_t b = 0; b < config_.num_blocks(); ++b) h = block_inference(b, h, key);
  return kernel::global_avg_pool_forward(h);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::backward_features(const FeatureTrace<Real>& trace,
                                               const Tensor<Real>& d_pooled,
                                               const std::vector<Tensor<Real>>& extra) {
  if (!extra.empty() && extra.size() != config_.num_blocks()) {
    throw UsageError("tcn backward: need one extra gradient per block");
  }
  const std::size_t len = trace.block_outputs.back().dim(2);
  Tensor<Real> d = kernel::global_avg_pool_backward(d_pooled, len);
  for (std::size_t b = config_.num_blocks(); b-- > 0;) {
    if (!extra.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += extra[b][i];
    }
    d = block_backward(b, trace.blocks[b], d);
  }
  return d;
}

template <typename Real>
Tensor<Real> TcnModel<Real>::classify_logits(const Tensor<Real>& pooled) const {
  return kernel::linear_forward(pooled, params_[head_index()].value,
                                params_[head_index() + 1].value);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::classify_backward(const Tensor<Real>& pooled,
                                               const Tensor<Real>& d_logits) {
  Parameter<Real>& w = params_[head_index()];
  Parameter<Real>& b = params_[head_index() + 1];
  return kernel::linear_backward(pooled, w.value, d_logits, w.trainable ? &w.grad : nullptr,
                                 b.trainable ? &b.grad : nullptr);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::domain_logits(const Tensor<Real>& pooled) const {
  return kernel::linear_forward(kernel::gradient_reversal_forward(pooled),
                                params_[head_index() + 2].value,
                                params_[head_index() + 3].value);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::domain_backward(const Tensor<Real>& pooled,
                                             const Tensor<Real>& d_logits, double lambda) {
  Parameter<Real>& w = params_[head_index() + 2];
  Parameter<Real>& b = params_[head_index() + 3];
  Tensor<Real> d = kernel::linear_backward(pooled, w.value, d_logits,
                                           w.trainable ? &w.grad : nullptr,
                                           b.trainable ? &b.grad : nullptr);
  return kernel::gradient_reversal_backward(d, lambda);
}

template <typename Real>
Tensor<Real> TcnModel<Real>::forward_classify(const Tensor<Real>& input, const std::string& key,
                                              Phase phase, kernel::Rng* rng) {
  return classify_logits(features(input, key, phase, rng, nullptr));
}

template <typename Real>
Tensor<Real> TcnModel<Real>::logits(const Tensor<Real>& input, const std::string& key) const {
  return classify_logits(features_inference(input, key));
}

// --- TADANN -------------------------------------------------------------------

template <typename Real>
TadannModel<Real>::TadannModel(TcnModel<Real> source, TcnModel<Real> target,
                               std::string calibration_key)
    : source_(std::move(source)), target_(std::move(target)), key_(std::move(calibration_key)) {
  if (!(source_.config() == target_.config())) {
    throw UsageError("tadann: source and target architectures differ");
  }
  for (std::size_t i = 0; i <= source_.config().num_blocks(); ++i) {
    coefficients_.emplace_back("fusion." + std::to_string(i), Tensor<Real>({1}, Real(1)));
  }
}

template <typename Real>
void TadannModel<Real>::clamp_coefficients() {
  for (auto& c : coefficients_) c.value[0] = Real(kernel::clamp_coefficient(c.value[0]));
}

template <typename Real>
std::vector<Parameter<Real>*> TadannModel<Real>::parameters() {
  std::vector<Parameter<Real>*> out = target_.classifier_parameters();
  for (Parameter<Real>* p : source_.classifier_parameters()) out.push_back(p);
  for (auto& c : coefficients_) out.push_back(&c);
  return out;
}

template <typename Real>
void TadannModel<Real>::zero_grad() {
  source_.zero_grad();
  target_.zero_grad();
  for (auto& c : coefficients_) c.zero_grad();
}

template <typename Real>
Tensor<Real> TadannModel<Real>::forward(const Tensor<Real>& input, Phase phase, kernel::Rng* rng,
                                        TadannTrace<Real>* trace) {
  if (phase == Phase::kInference && !trace) return logits(input);
  TadannTrace<Real> local;
  TadannTrace<Real>& tr = trace ? *trace : local;
  const Tensor<Real> source_pooled = source_.features(input, key_, phase, rng, &tr.source);
  const std::size_t blocks = target_.config().num_blocks();
  tr.target_blocks.assign(blocks, {});
  Tensor<Real> h = input;
  for (std::size_t b = 0; b < blocks; ++b) {
    h = target_.block_forward(b, h, key_, phase, rng, &tr.target_blocks[b]);
    h = kernel::scaled_add_forward(h, tr.source.block_outputs[b], alpha(b));
  }
  tr.fused_pooled = kernel::scaled_add_forward(kernel::global_avg_pool_forward(h),
                                               source_pooled, alpha(blocks));
  return target_.classify_logits(tr.fused_pooled);
}

template <typename Real>
void TadannModel<Real>::backward(const TadannTrace<Real>& trace, const Tensor<Real>& d_logits) {
  const std::size_t blocks = target_.config().num_blocks();
  const Tensor<Real> d_fused = target_.classify_backward(trace.fused_pooled, d_logits);
  Real* d_alpha_last = coefficients_[blocks].trainable ? &coefficients_[blocks].grad[0] : nullptr;
  const Tensor<Real> d_source_pooled =
      kernel::scaled_add_backward(trace.source.pooled, alpha(blocks), d_fused, d_alpha_last);
  const std::size_t len = trace.source.block_outputs.back().dim(2);
  Tensor<Real> d = kernel::global_avg_pool_backward(d_fused, len);
  std::vector<Tensor<Real>> d_source_blocks(blocks);
  for (std::size_t b = blocks; b-- > 0;) {
    Real* d_alpha = coefficients_[b].trainable ? &coefficients_[b].grad[0] : nullptr;
    d_source_blocks[b] =
        kernel::scaled_add_backward(trace.source.block_outputs[b], alpha(b), d, d_alpha);
    d = target_.block_backward(b, trace.target_blocks[b], d);
  }
  source_.backward_features(trace.source, d_source_pooled, d_source_blocks);
}

template <typename Real>
Tensor<Real> TadannModel<Real>::logits(const Tensor<Real>& input) const {
  const std::size_t blocks = target_.config().num_blocks();
  Tensor<Real> s = input, h = input;
  for (std::size_t b = 0; b < blocks; ++b) {
    s = source_.block_inference(b, s, key_);
    h = target_.block_inference(b, h, key_);
    h = kernel::scaled_add_forward(h, s, alpha(b));
  }
  const Tensor<Real> fused = kernel::scaled_add_forward(
      kernel::global_avg_pool_forward(h), kernel::global_avg_pool_forward(s), alpha(blocks));
  return target_.classify_logits(fused);
}

template <typename Real>
TadannModel<Real> build_tadann(const TcnModel<Real>& source, const TcnConfig& target_config,
                               const std::string& calibration_key, std::uint64_t seed) {
  if (!(source.config() == target_config)) {
    throw UsageError("tadann: target architecture does not match the pre-trained source");
  }
  TcnModel<Real> frozen = source;
  frozen.freeze_all_but_batch_norm();
  frozen.add_domain(calibration_key);
  TcnModel<Real> target(target_config, seed);
  target.add_domain(calibration_key);
  return TadannModel<Real>(std::move(frozen), std::move(target), calibration_key);
}

template <typename Real>
std::vector<int> argmax_rows(const Tensor<Real>& logits) {
  std::vector<int> out(logits.dim(0), 0);
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.dim(1); ++c) {
      if (logits.at(b, c) > logits.at(b, best)) best = c;
    }
    out[b] = int(best);
  }
  return out;
}

template <typename Real>
int predict(const TcnModel<Real>& model, const Tensor<Real>& window, const std::string& key) {
  const TcnConfig& cfg = model.config();
  if (window.size() != cfg.in_channels * window.shape().back()) {
    throw UsageError("predict: expected a single window");
  }
  Tensor<Real> batch({1, cfg.in_channels, window.shape().back()},
                     std::vector<Real>(window.values().begin(), window.values().end()));
  return argmax_rows(model.logits(batch, key)).front();
}

template class TcnModel<float>;
template class TcnModel<double>;
template class TadannModel<float>;
template class TadannModel<double>;
template TadannModel<float> build_tadann(const TcnModel<float>&, const TcnConfig&,
                                         const std::string&, std::uint64_t);
template TadannModel<double> build_tadann(const TcnModel<double>&, const TcnConfig&,
                                          const std::string&, std::uint64_t);
template std::vector<int> argmax_rows(const Tensor<float>&);
template std::vector<int> argmax_rows(const Tensor<double>&);
template int predict(const TcnModel<float>&, const Tensor<float>&, const std::string&);
template int predict(const TcnModel<double>&, const Tensor<double>&, const std::string&);

}  // namespace emgtl
