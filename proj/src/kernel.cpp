#include "emgtl/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace emgtl {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace kernel {
namespace {

template <typename Real>
void require_rank(const Tensor<Real>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw UsageError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace

// --- conv1d -----------------------------------------------------------------

template <typename Real>
Tensor<Real> conv1d_causal_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                   const Tensor<Real>& bias, std::size_t dilation) {
  require_rank(input, 3, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  const std::size_t batch = input.dim(0), in_ch = input.dim(1), len = input.dim(2);
  const std::size_t out_ch = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != in_ch || bias.size() != out_ch || dilation == 0 || k == 0) {
    throw UsageError("conv1d: shape mismatch, input " + shape_string(input.shape()) +
                     " weight " + shape_string(weight.shape()));
  }
  Tensor<Real> out({batch, out_ch, len});
  const Real* x = input.data();
  const Real* w = weight.data();
  Real* y = out.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_ch; ++o) {
      Real* yrow = y + (b * out_ch + o) * len;
      std::fill(yrow, yrow + len, bias[o]);
      for (std::size_t i = 0; i < in_ch; ++i) {
        const Real* xrow = x + (b * in_ch + i) * len;
        const Real* wrow = w + (o * in_ch + i) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t shift = (k - 1 - j) * dilation;
          if (shift >= len) continue;
          const Real wv = wrow[j];
          Real* __restrict yt = yrow + shift;
          const Real* __restrict xt = xrow;
          const std::size_t n = len - shift;
#pragma omp simd
          for (std::size_t t = 0; t < n; ++t) yt[t] += wv * xt[t];
        }
      }
    }
  }
  check_finite(out, "conv1d");
  return out;
}

template <typename Real>
Tensor<Real> conv1d_causal_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                    std::size_t dilation, const Tensor<Real>& d_output,
                                    Tensor<Real>* d_weight, Tensor<Real>* d_bias) {
  const std::size_t batch = input.dim(0), in_ch = input.dim(1), len = input.dim(2);
  const std::size_t out_ch = weight.dim(0), k = weight.dim(2);
  if (d_output.shape() != std::vector<std::size_t>{batch, out_ch, len}) {
    throw UsageError("conv1d backward: gradient shape " + shape_string(d_output.shape()));
  }
  const Real* x = input.data();
  const Real* w = weight.data();
  const Real* dy = d_output.data();

  Tensor<Real> d_input({batch, in_ch, len});
  Real* dx = d_input.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < in_ch; ++i) {
      Real* dxrow = dx + (b * in_ch + i) * len;
      for (std::size_t o = 0; o < out_ch; ++o) {
        const Real* dyrow = dy + (b * out_ch + o) * len;
        const Real* wrow = w + (o * in_ch + i) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t shift = (k - 1 - j) * dilation;
          if (shift >= len) continue;
          const Real wv = wrow[j];
          Real* __restrict dxt = dxrow;
          const Real* __restrict dyt = dyrow + shift;
          const std::size_t n = len - shift;
#pragma omp simd
          for (std::size_t t = 0; t < n; ++t) dxt[t] += wv * dyt[t];
        }
      }
    }
  }

  if (d_weight) {
    Real* dw = d_weight->data();
    // each output channel owns its slice of d_weight; batches are summed in order
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < out_ch; ++o) {
      std::vector<Real> acc(in_ch * k, Real(0));
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* __restrict dyrow = dy + (b * out_ch + o) * len;
        for (std::size_t i = 0; i < in_ch; ++i) {
          const Real* __restrict xrow = x + (b * in_ch + i) * len;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t shift = (k - 1 - j) * dilation;
            if (shift >= len) continue;
            const std::size_t n = len - shift;
            Real part = 0;
#pragma omp simd reduction(+ : part)
            for (std::size_t t = 0; t < n; ++t) part += dyrow[t + shift] * xrow[t];
            acc[i * k + j] += part;
          }
        }
      }
      for (std::size_t q = 0; q < in_ch * k; ++q) dw[o * in_ch * k + q] += acc[q];
    }
  }
  if (d_bias) {
    Real* db = d_bias->data();
#pragma omp parallel for schedule(static)
    for (std::size_t o = 0; o < out_ch; ++o) {
      Real acc = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* dyrow = dy + (b * out_ch + o) * len;
#pragma omp simd reduction(+ : acc)
        for (std::size_t t = 0; t < len; ++t) acc += dyrow[t];
      }
      db[o] += acc;
    }
  }
  check_finite(d_input, "conv1d backward");
  return d_input;
}

// --- batch norm ---------------------------------------------------------------

template <typename Real>
void DomainStats<Real>::add(const std::string& key) {
  if (contains(key)) return;
  banks_.emplace(key, RunningStats<Real>{std::vector<Real>(channels_, Real(0)),
                                         std::vector<Real>(channels_, Real(1))});
}

template <typename Real>
RunningStats<Real>& DomainStats<Real>::at(const std::string& key) {
  auto it = banks_.find(key);
  if (it == banks_.end()) throw UsageError("batch norm: unknown domain '" + key + "'");
  return it->second;
}

template <typename Real>
const RunningStats<Real>& DomainStats<Real>::at(const std::string& key) const {
  auto it = banks_.find(key);
  if (it == banks_.end()) throw UsageError("batch norm: unknown domain '" + key + "'");
  return it->second;
}

template <typename Real>
std::vector<std::string> DomainStats<Real>::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : banks_) out.push_back(k);
  return out;
}

template <typename Real>
Tensor<Real> batch_norm_forward(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                const Tensor<Real>& beta, DomainStats<Real>& stats,
                                const std::string& key, BnMode mode, const BnOptions& options,
                                BnCache<Real>* cache) {
  require_rank(input, 3, "batch norm input");
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  if (gamma.size() != ch || beta.size() != ch || stats.channels() != ch) {
    throw UsageError("batch norm: channel mismatch for input " + shape_string(input.shape()));
  }
  RunningStats<Real>& bank = stats.at(key);
  const bool use_batch = mode != BnMode::kInference;
  const std::size_t n = batch * len;
  if (use_batch && n < 2) throw UsageError("batch norm: need at least 2 values per channel");

  std::vector<Real> mean(ch), inv_std(ch);
  std::vector<double> batch_var(ch);
  const Real* x = input.data();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < ch; ++c) {
    if (use_batch) {
      double sum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* row = x + (b * ch + c) * len;
        for (std::size_t t = 0; t < len; ++t) sum += row[t];
      }
      const double mu = sum / double(n);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* row = x + (b * ch + c) * len;
        for (std::size_t t = 0; t < len; ++t) {
          const double d = row[t] - mu;
          sq += d * d;
        }
      }
      batch_var[c] = sq / double(n);
      mean[c] = Real(mu);
      inv_std[c] = Real(1.0 / std::sqrt(batch_var[c] + options.eps));
    } else {
      mean[c] = bank.mean[c];
      inv_std[c] = Real(1.0 / std::sqrt(double(bank.var[c]) + options.eps));
    }
  }

  if (mode == BnMode::kTrain) {
    const double m = options.momentum;
    const double unbias = double(n) / double(n - 1);
    for (std::size_t c = 0; c < ch; ++c) {
      bank.mean[c] = Real((1.0 - m) * bank.mean[c] + m * mean[c]);
      bank.var[c] = Real((1.0 - m) * bank.var[c] + m * batch_var[c] * unbias);
    }
  }

  Tensor<Real> out(input.shape());
  Tensor<Real> normalized;
  if (cache) normalized = Tensor<Real>(input.shape());
  Real* y = out.data();
  Real* xh = cache ? normalized.data() : nullptr;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (b * ch + c) * len;
      const Real mu = mean[c], is = inv_std[c], g = gamma[c], bt = beta[c];
      for (std::size_t t = 0; t < len; ++t) {
        const Real h = (x[off + t] - mu) * is;
        if (xh) xh[off + t] = h;
        y[off + t] = g * h + bt;
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_statistics = use_batch;
  }
  check_finite(out, "batch norm");
  return out;
}

template <typename Real>
Tensor<Real> batch_norm_inference(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                  const Tensor<Real>& beta, const RunningStats<Real>& stats,
                                  double eps) {
  require_rank(input, 3, "batch norm input");
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  if (gamma.size() != ch || beta.size() != ch || stats.mean.size() != ch) {
    throw UsageError("batch norm: channel mismatch for input " + shape_string(input.shape()));
  }
  Tensor<Real> out(input.shape());
  const Real* x = input.data();
  Real* y = out.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (b * ch + c) * len;
      const Real mu = stats.mean[c];
      const Real is = Real(1.0 / std::sqrt(double(stats.var[c]) + eps));
      const Real g = gamma[c], bt = beta[c];
      for (std::size_t t = 0; t < len; ++t) y[off + t] = g * ((x[off + t] - mu) * is) + bt;
    }
  }
  check_finite(out, "batch norm");
  return out;
}

template <typename Real>
Tensor<Real> batch_norm_backward(const BnCache<Real>& cache, const Tensor<Real>& gamma,
                                 const Tensor<Real>& d_output, Tensor<Real>* d_gamma,
                                 Tensor<Real>* d_beta) {
  const Tensor<Real>& xh = cache.normalized;
  if (!xh.same_shape(d_output)) throw UsageError("batch norm backward: shape mismatch");
  const std::size_t batch = xh.dim(0), ch = xh.dim(1), len = xh.dim(2);
  const double n = double(batch * len);
  Tensor<Real> d_input(xh.shape());
  const Real* dy = d_output.data();
  const Real* h = xh.data();
  Real* dx = d_input.data();

  std::vector<double> sum_dy(ch), sum_dy_h(ch);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < ch; ++c) {
    double s = 0.0, sh = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        s += dy[off + t];
        sh += double(dy[off + t]) * h[off + t];
      }
    }
    sum_dy[c] = s;
    sum_dy_h[c] = sh;
  }
  for (std::size_t c = 0; c < ch; ++c) {
    if (d_gamma) (*d_gamma)[c] += Real(sum_dy_h[c]);
    if (d_beta) (*d_beta)[c] += Real(sum_dy[c]);
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (b * ch + c) * len;
      const double scale = double(gamma[c]) * cache.inv_std[c];
      if (cache.batch_statistics) {
        const double mean_dy = sum_dy[c] / n, mean_dy_h = sum_dy_h[c] / n;
        for (std::size_t t = 0; t < len; ++t) {
          dx[off + t] = Real(scale * (dy[off + t] - mean_dy - h[off + t] * mean_dy_h));
        }
      } else {
        for (std::size_t t = 0; t < len; ++t) dx[off + t] = Real(scale * dy[off + t]);
      }
    }
  }
  check_finite(d_input, "batch norm backward");
  return d_input;
}

// --- pointwise ----------------------------------------------------------------

template <typename Real>
Tensor<Real> leaky_relu_forward(const Tensor<Real>& input, Real slope) {
  Tensor<Real> out(input.shape());
  const std::size_t n = input.size();
  const Real* x = input.data();
  Real* y = out.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
  return out;
}

template <typename Real>
Tensor<Real> leaky_relu_backward(const Tensor<Real>& input, Real slope,
                                 const Tensor<Real>& d_output) {
  Tensor<Real> out(input.shape());
  const std::size_t n = input.size();
  const Real* x = input.data();
  const Real* dy = d_output.data();
  Real* dx = out.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0 ? dy[i] : slope * dy[i];
  return out;
}

template <typename Real>
Tensor<Real> dropout_forward(const Tensor<Real>& input, double rate, bool training, Rng* rng,
                             Tensor<Real>* mask) {
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask) *mask = Tensor<Real>();
    return input;
  }
  if (!rng) throw UsageError("dropout: training mode requires a generator");
  // One draw from `rng` seeds a counter-based stream: element i takes 16 bits of
  // splitmix64(seed + i / 4), so the mask does not depend on the thread count.
  const std::uint64_t seed = (*rng)();
  Tensor<Real> m(input.shape());
  Real* __restrict mv = m.data();
  const std::size_t count = m.size();
  const Real keep_scale = Real(1.0 / (1.0 - rate));
  const auto threshold = std::uint32_t(std::llround(rate * 65536.0));
  const std::size_t words = (count + 3) / 4;
#pragma omp parallel for schedule(static)
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (w + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    for (std::size_t lane = 0; lane < 4 && 4 * w + lane < count; ++lane) {
      mv[4 * w + lane] = keep_scale * Real(std::uint32_t((z >> (16 * lane)) & 0xffff) >= threshold);
    }
  }
  Tensor<Real> out(input.shape());
  const Real* __restrict xv = input.data();
  Real* __restrict yv = out.data();
#pragma omp simd
  for (std::size_t q = 0; q < count; ++q) yv[q] = xv[q] * mv[q];
  if (mask) *mask = std::move(m);
  return out;
}

template <typename Real>
Tensor<Real> dropout_backward(const Tensor<Real>& mask, const Tensor<Real>& d_output) {
  if (mask.empty()) return d_output;
  Tensor<Real> out(d_output.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d_output[i] * mask[i];
  return out;
}

template <typename Real>
Tensor<Real> global_avg_pool_forward(const Tensor<Real>& input) {
  require_rank(input, 3, "global average pool");
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  Tensor<Real> out({batch, ch});
  for (std::size_t r = 0; r < batch * ch; ++r) {
    double s = 0.0;
    const Real* row = input.data() + r * len;
    for (std::size_t t = 0; t < len; ++t) s += row[t];
    out[r] = Real(s / double(len));
  }
  return out;
}

template <typename Real>
Tensor<Real> global_avg_pool_backward(const Tensor<Real>& d_output, std::size_t length) {
  const std::size_t batch = d_output.dim(0), ch = d_output.dim(1);
  Tensor<Real> out({batch, ch, length});
  const Real inv = Real(1.0 / double(length));
  for (std::size_t r = 0; r < batch * ch; ++r) {
    const Real g = d_output[r] * inv;
    std::fill(out.data() + r * length, out.data() + (r + 1) * length, g);
  }
  return out;
}

template <typename Real>
Tensor<Real> linear_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                            const Tensor<Real>& bias) {
  require_rank(input, 2, "linear input");
  const std::size_t batch = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  if (weight.rank() != 2 || weight.dim(1) != in || bias.size() != out_dim) {
    throw UsageError("linear: shape mismatch, input " + shape_string(input.shape()) +
                     " weight " + shape_string(weight.shape()));
  }
  Tensor<Real> out({batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const Real* x = input.data() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const Real* w = weight.data() + o * in;
      Real acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      out.at(b, o) = acc;
    }
  }
  check_finite(out, "linear");
  return out;
}

template <typename Real>
Tensor<Real> linear_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                             const Tensor<Real>& d_output, Tensor<Real>* d_weight,
                             Tensor<Real>* d_bias) {
  const std::size_t batch = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  Tensor<Real> d_input({batch, in});
  for (std::size_t b = 0; b < batch; ++b) {
    Real* dx = d_input.data() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const Real g = d_output.at(b, o);
      const Real* w = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dx[i] += g * w[i];
    }
  }
  if (d_weight) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      Real* dw = d_weight->data() + o * in;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real g = d_output.at(b, o);
        const Real* x = input.data() + b * in;
        for (std::size_t i = 0; i < in; ++i) dw[i] += g * x[i];
      }
    }
  }
  if (d_bias) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      Real acc = 0;
      for (std::size_t b = 0; b < batch; ++b) acc += d_output.at(b, o);
      (*d_bias)[o] += acc;
    }
  }
  return d_input;
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor<Real> out(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    Real mx = logits.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits.at(b, c));
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(double(logits.at(b, c) - mx));
    for (std::size_t c = 0; c < classes; ++c) {
      out.at(b, c) = Real(std::exp(double(logits.at(b, c) - mx)) / z);
    }
  }
  return out;
}

template <typename Real>
LossResult<Real> softmax_cross_entropy(const Tensor<Real>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) throw UsageError("cross entropy: label count mismatch");
  for (int y : labels) {
    if (y < 0 || std::size_t(y) >= classes) {
      throw UsageError("cross entropy: label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(classes) + ")");
    }
  }
  LossResult<Real> r;
  r.d_logits = Tensor<Real>(logits.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = logits.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, double(logits.at(b, c)));
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(double(logits.at(b, c)) - mx);
    const double log_z = mx + std::log(z);
    total += log_z - double(logits.at(b, std::size_t(labels[b])));
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(double(logits.at(b, c)) - log_z);
      const double target = std::size_t(labels[b]) == c ? 1.0 : 0.0;
      r.d_logits.at(b, c) = Real((p - target) / double(batch));
    }
  }
  r.loss = total / double(batch);
  if (!std::isfinite(r.loss)) throw NumericalFault("non-finite cross-entropy loss");
  return r;
}

template <typename Real>
Tensor<Real> gradient_reversal_backward(const Tensor<Real>& d_output, double lambda) {
  Tensor<Real> out(d_output.shape());
  const Real s = Real(-lambda);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * d_output[i];
  return out;
}

template <typename Real>
Tensor<Real> scaled_add_forward(const Tensor<Real>& target, const Tensor<Real>& source,
                                Real alpha) {
  if (!target.same_shape(source)) {
    throw UsageError("fusion: shape mismatch " + shape_string(target.shape()) + " vs " +
                     shape_string(source.shape()));
  }
  Tensor<Real> out(target.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target[i] + alpha * source[i];
  return out;
}

template <typename Real>
Tensor<Real> scaled_add_backward(const Tensor<Real>& source, Real alpha,
                                 const Tensor<Real>& d_output, Real* d_alpha) {
  Tensor<Real> d_source(source.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    d_source[i] = alpha * d_output[i];
    acc += double(d_output[i]) * source[i];
  }
  if (d_alpha) *d_alpha += Real(acc);
  return d_source;
}

double clamp_coefficient(double value) { return std::clamp(value, 0.0, 2.0); }

#define EMGTL_INSTANTIATE(Real)                                                              \
  template Tensor<Real> conv1d_causal_forward(const Tensor<Real>&, const Tensor<Real>&,      \
                                              const Tensor<Real>&, std::size_t);              \
  template Tensor<Real> conv1d_causal_backward(const Tensor<Real>&, const Tensor<Real>&,     \
                                               std::size_t, const Tensor<Real>&,             \
                                               Tensor<Real>*, Tensor<Real>*);                \
  template class DomainStats<Real>;                                                          \
  template Tensor<Real> batch_norm_forward(const Tensor<Real>&, const Tensor<Real>&,         \
                                           const Tensor<Real>&, DomainStats<Real>&,          \
                                           const std::string&, BnMode, const BnOptions&,     \
                                           BnCache<Real>*);                                  \
  template Tensor<Real> batch_norm_inference(const Tensor<Real>&, const Tensor<Real>&,       \
                                             const Tensor<Real>&, const RunningStats<Real>&,  \
                                             double);                                         \
  template Tensor<Real> batch_norm_backward(const BnCache<Real>&, const Tensor<Real>&,       \
                                            const Tensor<Real>&, Tensor<Real>*,              \
                                            Tensor<Real>*);                                  \
  template Tensor<Real> leaky_relu_forward(const Tensor<Real>&, Real);                       \
  template Tensor<Real> leaky_relu_backward(const Tensor<Real>&, Real, const Tensor<Real>&); \
  template Tensor<Real> dropout_forward(const Tensor<Real>&, double, bool, Rng*,             \
                                        Tensor<Real>*);                                      \
  template Tensor<Real> dropout_backward(const Tensor<Real>&, const Tensor<Real>&);          \
  template Tensor<Real> global_avg_pool_forward(const Tensor<Real>&);                        \
  template Tensor<Real> global_avg_pool_backward(const Tensor<Real>&, std::size_t);          \
  template Tensor<Real> linear_forward(const Tensor<Real>&, const Tensor<Real>&,             \
                                       const Tensor<Real>&);                                 \
  template Tensor<Real> linear_backward(const Tensor<Real>&, const Tensor<Real>&,            \
                                        const Tensor<Real>&, Tensor<Real>*, Tensor<Real>*);  \
  template Tensor<Real> softmax(const Tensor<Real>&);                                        \
  template LossResult<Real> softmax_cross_entropy(const Tensor<Real>&, std::span<const int>); \
  template Tensor<Real> gradient_reversal_backward(const Tensor<Real>&, double);             \
  template Tensor<Real> scaled_add_forward(const Tensor<Real>&, const Tensor<Real>&, Real);  \
  template Tensor<Real> scaled_add_backward(const Tensor<Real>&, Real, const Tensor<Real>&,  \
                                            Real*);

EMGTL_INSTANTIATE(float)
EMGTL_INSTANTIATE(double)

#undef EMGTL_INSTANTIATE

}  // namespace kernel
}  // namespace emgtl
