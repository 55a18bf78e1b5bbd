#pragma once

// sEMG preprocessing: Butterworth band-pass design, causal filtering,
// sliding-window segmentation and the amplitude statistics (MAV, MSA).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "emgtl/error.hpp"

namespace emgtl {

/// Multichannel recording, channels x time, channel-major storage.
class RawSignal {
 public:
  RawSignal() = default;
  RawSignal(std::size_t channels, std::size_t length, double sample_rate = 1000.0);
  RawSignal(std::size_t channels, std::vector<double> samples, double sample_rate = 1000.0);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  double sample_rate() const { return sample_rate_; }

  double& at(std::size_t channel, std::size_t t) { return samples_[channel * length_ + t]; }
  double at(std::size_t channel, std::size_t t) const { return samples_[channel * length_ + t]; }
  std::span<double> channel(std::size_t c) { return {samples_.data() + c * length_, length_}; }
  std::span<const double> channel(std::size_t c) const {
    return {samples_.data() + c * length_, length_};
  }
  std::span<const double> samples() const { return samples_; }

  /// Copy of samples [start, start + count) on every channel.
  RawSignal slice(std::size_t start, std::size_t count) const;

  bool all_finite() const;

  friend bool operator==(const RawSignal&, const RawSignal&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  double sample_rate_ = 1000.0;
  std::vector<double> samples_;
};

struct FilterSpec {
  double low_cut_hz = 20.0;
  double high_cut_hz = 495.0;
  int order = 4;  // analog prototype order; the band-pass has 2*order poles
  double sample_rate_hz = 1000.0;

  void validate() const;
};

/// y = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
  double sample_rate_hz = 1000.0;
};

/// Butterworth band-pass as cascaded second-order sections (bilinear
/// transform with pre-warped band edges). Throws UsageError for an invalid spec.
FilterCoefficients design_bandpass(const FilterSpec& spec);

/// |H(e^{j 2 pi f / fs})| of the cascade.
double magnitude_response(const FilterCoefficients& coeffs, double frequency_hz);

/// Forward-only filtering of every channel with zero initial state
/// (transposed direct form II per section). Throws DataError on non-finite input.
RawSignal filter_causal(const RawSignal& signal, const FilterCoefficients& coeffs);

struct WindowSpec {
  double window_ms = 150.0;
  double overlap_ms = 100.0;

  double stride_ms() const { return window_ms - overlap_ms; }
  void validate() const;
  std::size_t window_samples(double sample_rate_hz) const;
  std::size_t stride_samples(double sample_rate_hz) const;
};

struct WindowBounds {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// floor((T - W) / S) + 1 when T >= W, otherwise 0.
std::size_t window_count(std::size_t total, std::size_t window, std::size_t stride);

/// Window positions in temporal order; a trailing partial window is dropped.
std::vector<WindowBounds> segment_windows(std::size_t total, std::size_t window,
                                          std::size_t stride);
std::vector<WindowBounds> segment_windows(const RawSignal& signal, const WindowSpec& spec);

/// Per-channel mean absolute value of a channels x time block stored channel-major.
template <typename T>
std::vector<double> mav(std::span<const T> window, std::size_t channels) {
  if (channels == 0 || window.empty() || window.size() % channels != 0) {
    throw UsageError("mav: window size must be a positive multiple of the channel count");
  }
  const std::size_t len = window.size() / channels;
  std::vector<double> out(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += std::abs(double(window[c * len + t]));
    out[c] = s / double(len);
  }
  return out;
}

/// Mean of the per-channel MAVs.
template <typename T>
double scalar_mav(std::span<const T> window, std::size_t channels) {
  const auto per_channel = mav(window, channels);
  double s = 0.0;
  for (double v : per_channel) s += v;
  return s / double(per_channel.size());
}

struct MsaResult {
  double value = 0.0;
  bool degenerate = false;
};

/// Mean semi-principal axis of a point cloud: geometric mean of the square
/// roots of the sample-covariance eigenvalues. `rows` is N x dims, row-major,
/// with N > dims. A rank-deficient covariance yields {0, degenerate=true}.
MsaResult msa(std::span<const double> rows, std::size_t dims);

}  // namespace emgtl
