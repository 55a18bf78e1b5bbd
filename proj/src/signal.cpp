#include "emgtl/signal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <numbers>
#include <string>

namespace emgtl {

RawSignal::RawSignal(std::size_t channels, std::size_t length, double sample_rate)
    : channels_(channels), length_(length), sample_rate_(sample_rate),
      samples_(channels * length, 0.0) {}

RawSignal::RawSignal(std::size_t channels, std::vector<double> samples, double sample_rate)
    : channels_(channels), sample_rate_(sample_rate), samples_(std::move(samples)) {
  if (channels_ == 0 || samples_.size() % channels_ != 0) {
    throw DataError("raw signal: sample count not divisible by channel count");
  }
  length_ = samples_.size() / channels_;
}

RawSignal RawSignal::slice(std::size_t start, std::size_t count) const {
  if (start + count > length_) throw UsageError("raw signal: slice out of range");
  RawSignal out(channels_, count, sample_rate_);
  for (std::size_t c = 0; c < channels_; ++c) {
    std::copy_n(samples_.data() + c * length_ + start, count, out.channel(c).data());
  }
  return out;
}

bool RawSignal::all_finite() const {
  return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
}

// --- filter design ------------------------------------------------------------

void FilterSpec::validate() const {
  const double nyquist = sample_rate_hz / 2.0;
  if (!(sample_rate_hz > 0.0)) throw UsageError("filter: sample rate must be positive");
  if (order < 1) throw UsageError("filter: order must be at least 1");
  if (!(low_cut_hz > 0.0) || !(low_cut_hz < high_cut_hz)) {
    throw UsageError("filter: need 0 < low_cut < high_cut");
  }
  if (!(high_cut_hz < nyquist)) {
    throw UsageError("filter: high_cut " + std::to_string(high_cut_hz) +
                     " Hz must lie below Nyquist " + std::to_string(nyquist) + " Hz");
  }
}

FilterCoefficients design_bandpass(const FilterSpec& spec) {
  spec.validate();
  using cd = std::complex<double>;
  const double fs2 = 2.0 * spec.sample_rate_hz;
  const double pi = std::numbers::pi;
  // pre-warped analog band edges (rad/s)
  const double wl = fs2 * std::tan(pi * spec.low_cut_hz / spec.sample_rate_hz);
  const double wh = fs2 * std::tan(pi * spec.high_cut_hz / spec.sample_rate_hz);
  const double bw = wh - wl;
  const double w0 = std::sqrt(wl * wh);
  const int n = spec.order;

  std::vector<cd> analog_poles;
  for (int m = 1; m <= n; ++m) {
    const cd proto = std::polar(1.0, pi * double(2 * m + n - 1) / double(2 * n));
    const cd a = proto * bw / 2.0;
    const cd disc = std::sqrt(a * a - w0 * w0);
    analog_poles.push_back(a + disc);
    analog_poles.push_back(a - disc);
  }

  // bilinear map; n zeros at s=0 go to z=+1, n zeros at infinity to z=-1
  cd gain = std::pow(cd(bw * fs2), n);
  std::vector<cd> poles;
  for (const cd& p : analog_poles) {
    gain /= (fs2 - p);
    poles.push_back((fs2 + p) / (fs2 - p));
  }

  std::vector<cd> upper;
  std::vector<double> real_poles;
  for (const cd& p : poles) {
    if (std::abs(p.imag()) <= 1e-12 * std::max(1.0, std::abs(p))) {
      real_poles.push_back(p.real());
    } else if (p.imag() > 0) {
      upper.push_back(p);
    }
  }
  std::sort(upper.begin(), upper.end(), [](cd x, cd y) { return std::abs(x) < std::abs(y); });
  std::sort(real_poles.begin(), real_poles.end());

  FilterCoefficients out;
  out.sample_rate_hz = spec.sample_rate_hz;
  for (const cd& p : upper) {
    out.sections.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double p1 = real_poles[i], p2 = real_poles[i + 1];
    out.sections.push_back({1.0, 0.0, -1.0, -(p1 + p2), p1 * p2});
  }
  if (out.sections.size() != std::size_t(n)) {
    throw NumericalFault("filter: pole pairing produced an unexpected section count");
  }
  Biquad& first = out.sections.front();
  first.b0 *= gain.real();
  first.b1 *= gain.real();
  first.b2 *= gain.real();
  return out;
}

double magnitude_response(const FilterCoefficients& coeffs, double frequency_hz) {
  using cd = std::complex<double>;
  const double omega = 2.0 * std::numbers::pi * frequency_hz / coeffs.sample_rate_hz;
  const cd z1 = std::polar(1.0, -omega);
  const cd z2 = z1 * z1;
  cd h = 1.0;
  for (const Biquad& s : coeffs.sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return std::abs(h);
}

RawSignal filter_causal(const RawSignal& signal, const FilterCoefficients& coeffs) {
  if (!signal.all_finite()) throw DataError("filter: input contains non-finite samples");
  RawSignal out = signal;
  const std::size_t channels = signal.channels(), len = signal.length();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    std::span<double> x = out.channel(c);
    for (const Biquad& s : coeffs.sections) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double in = x[t];
        const double y = s.b0 * in + s1;
        s1 = s.b1 * in - s.a1 * y + s2;
        s2 = s.b2 * in - s.a2 * y;
        x[t] = y;
      }
    }
  }
  return out;
}

// --- windowing ----------------------------------------------------------------

void WindowSpec::validate() const {
  if (!(window_ms > 0.0)) throw UsageError("window: window_ms must be positive");
  if (overlap_ms < 0.0 || !(overlap_ms < window_ms)) {
    throw UsageError("window: need 0 <= overlap_ms < window_ms");
  }
}

std::size_t WindowSpec::window_samples(double sample_rate_hz) const {
  validate();
  return std::size_t(std::llround(window_ms * sample_rate_hz / 1000.0));
}

std::size_t WindowSpec::stride_samples(double sample_rate_hz) const {
  validate();
  const auto s = std::size_t(std::llround(stride_ms() * sample_rate_hz / 1000.0));
  if (s == 0) throw UsageError("window: stride rounds to zero samples");
  return s;
}

std::size_t window_count(std::size_t total, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw UsageError("window: zero window or stride");
  if (total < window) return 0;
  return (total - window) / stride + 1;
}

std::vector<WindowBounds> segment_windows(std::size_t total, std::size_t window,
                                          std::size_t stride) {
  const std::size_t n = window_count(total, window, stride);
  std::vector<WindowBounds> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({i * stride, window});
  return out;
}

std::vector<WindowBounds> segment_windows(const RawSignal& signal, const WindowSpec& spec) {
  return segment_windows(signal.length(), spec.window_samples(signal.sample_rate()),
                         spec.stride_samples(signal.sample_rate()));
}

// --- MSA ----------------------------------------------------------------------

MsaResult msa(std::span<const double> rows, std::size_t dims) {
  if (dims == 0 || rows.size() % dims != 0) {
    throw UsageError("msa: row buffer is not a multiple of the dimension");
  }
  const std::size_t n = rows.size() / dims;
  if (n <= dims) {
    throw UsageError("msa: need more points (" + std::to_string(n) + ") than dimensions (" +
                     std::to_string(dims) + ")");
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      rows.data(), Eigen::Index(n), Eigen::Index(dims));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& eig = solver.eigenvalues();  // ascending
  const double largest = eig(eig.size() - 1);
  if (!(largest > 0.0) || eig(0) <= 1e-12 * largest) return {0.0, true};
  double log_sum = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) log_sum += 0.5 * std::log(eig(i));
  return {std::exp(log_sum / double(dims)), false};
}

}  // namespace emgtl
