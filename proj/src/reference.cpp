#include "emgtl/reference.hpp"

#include <cmath>

namespace emgtl::reference {

template <typename Real>
Tensor<Real> conv1d_causal_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                   const Tensor<Real>& bias, std::size_t dilation) {
  const std::size_t batch = input.dim(0), in_ch = input.dim(1), len = input.dim(2);
  const std::size_t out_ch = weight.dim(0), k = weight.dim(2);
  Tensor<Real> out({batch, out_ch, len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t t = 0; t < len; ++t) {
        Real acc = bias[o];
        for (std::size_t i = 0; i < in_ch; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            // index into the zero-padded input
            const long src = long(t) + long(j * dilation) - long((k - 1) * dilation);
            if (src >= 0) acc += weight.at(o, i, j) * input.at(b, i, std::size_t(src));
          }
        out.at(b, o, t) = acc;
      }
  return out;
}

template <typename Real>
ConvGrads<Real> conv1d_causal_backward(const Tensor<Real>& input, const Tensor<Real>& weight,
                                       std::size_t dilation, const Tensor<Real>& d_output) {
  const std::size_t batch = input.dim(0), in_ch = input.dim(1), len = input.dim(2);
  const std::size_t out_ch = weight.dim(0), k = weight.dim(2);
  ConvGrads<Real> g{Tensor<Real>(input.shape()), Tensor<Real>(weight.shape()),
                    Tensor<Real>({out_ch})};
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_ch; ++o)
      for (std::size_t t = 0; t < len; ++t) {
        const Real dy = d_output.at(b, o, t);
        g.d_bias[o] += dy;
        for (std::size_t i = 0; i < in_ch; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const long src = long(t) + long(j * dilation) - long((k - 1) * dilation);
            if (src < 0) continue;
            g.d_weight.at(o, i, j) += dy * input.at(b, i, std::size_t(src));
            g.d_input.at(b, i, std::size_t(src)) += dy * weight.at(o, i, j);
          }
      }
  return g;
}

template <typename Real>
Tensor<Real> batch_norm_train_forward(const Tensor<Real>& input, const Tensor<Real>& gamma,
                                      const Tensor<Real>& beta, double eps) {
  const std::size_t batch = input.dim(0), ch = input.dim(1), len = input.dim(2);
  Tensor<Real> out(input.shape());
  for (std::size_t c = 0; c < ch; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) sum += input.at(b, c, t);
    const double mean = sum / double(batch * len);
    double sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) sq += std::pow(input.at(b, c, t) - mean, 2);
    const double var = sq / double(batch * len);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t)
        out.at(b, c, t) =
            Real(gamma[c] * (input.at(b, c, t) - mean) / std::sqrt(var + eps) + beta[c]);
  }
  return out;
}

RawSignal filter_causal(const RawSignal& signal, const FilterCoefficients& coeffs) {
  RawSignal out = signal;
  const std::size_t len = signal.length();
  for (std::size_t c = 0; c < signal.channels(); ++c) {
    std::vector<double> x(len), y(len);
    for (std::size_t t = 0; t < len; ++t) x[t] = signal.at(c, t);
    for (const Biquad& s : coeffs.sections) {
      for (std::size_t t = 0; t < len; ++t) {
        const double x1 = t >= 1 ? x[t - 1] : 0.0, x2 = t >= 2 ? x[t - 2] : 0.0;
        const double y1 = t >= 1 ? y[t - 1] : 0.0, y2 = t >= 2 ? y[t - 2] : 0.0;
        y[t] = s.b0 * x[t] + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      }
      x.swap(y);
    }
    for (std::size_t t = 0; t < len; ++t) out.at(c, t) = x[t];
  }
  return out;
}

template Tensor<float> conv1d_causal_forward(const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&, std::size_t);
template Tensor<double> conv1d_causal_forward(const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>&, std::size_t);
template ConvGrads<float> conv1d_causal_backward(const Tensor<float>&, const Tensor<float>&,
                                                 std::size_t, const Tensor<float>&);
template ConvGrads<double> conv1d_causal_backward(const Tensor<double>&, const Tensor<double>&,
                                                  std::size_t, const Tensor<double>&);
template Tensor<float> batch_norm_train_forward(const Tensor<float>&, const Tensor<float>&,
                                                const Tensor<float>&, double);
template Tensor<double> batch_norm_train_forward(const Tensor<double>&, const Tensor<double>&,
                                                 const Tensor<double>&, double);

}  // namespace emgtl::reference
