#pragma once

// Recording sessions: in-memory representation, the canonical on-disk
// format, the synthetic multi-session generator, and preprocessing into
// labelled 10 x 150 windows.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgtl/signal.hpp"

namespace emgtl {

inline constexpr int kNumGestures = 11;
inline constexpr std::size_t kArmbandChannels = 10;

struct GestureSegment {
  int gesture = 0;
  std::size_t start = 0;   // sample index within the cycle
  std::size_t length = 0;  // samples

  friend bool operator==(const GestureSegment&, const GestureSegment&) = default;
};

/// One pass over all eleven gestures.
struct CycleRecording {
  int cycle_id = 1;
  RawSignal signal;
  std::vector<GestureSegment> segments;

  friend bool operator==(const CycleRecording&, const CycleRecording&) = default;
};

struct EvaluationTrial {
  int gesture = 0;
  int intensity_level = 1;  // 1, 2 or 3
  double target_pitch_deg = 0.0;
  double target_yaw_deg = 0.0;
  std::size_t start = 0;
  std::size_t length = 0;

  friend bool operator==(const EvaluationTrial&, const EvaluationTrial&) = default;
};

/// The in-game recording: consecutive timed trials plus the measured arm angles.
struct EvaluationRun {
  RawSignal signal;
  std::vector<EvaluationTrial> trials;
  double frame_rate_hz = 100.0;
  std::vector<double> pitch_deg;  // one value per frame
  std::vector<double> yaw_deg;
  std::optional<double> score;

  friend bool operator==(const EvaluationRun&, const EvaluationRun&) = default;
};

struct SessionDataset {
  std::string participant;
  int session_index = 1;
  double day_offset = 0.0;
  double gesture_seconds = 5.0;
  std::vector<CycleRecording> cycles;
  std::vector<EvaluationRun> evaluation_runs;

  const CycleRecording& cycle(int id) const;
  friend bool operator==(const SessionDataset&, const SessionDataset&) = default;
};

/// Throws DataError when a session breaks the layout rules (11 gestures per
/// cycle, each gesture_seconds long within 2%, finite samples, 10 channels).
void validate_session(const SessionDataset& session);

// --- canonical format -----------------------------------------------------------
//
// <root>/MANIFEST                         "sha256  <relative path>" per file, sorted
// <root>/<participant>/session_<k>/session.txt
// <root>/<participant>/session_<k>/cycle_<c>.bin   int16 LE, sample-major (t0: ch0..ch9, t1: ...)
// <root>/<participant>/session_<k>/cycle_<c>.txt   sidecar: sample count + gesture boundaries
// <root>/<participant>/session_<k>/eval_<r>.bin    int16 LE, as above
// <root>/<participant>/session_<k>/eval_<r>.txt    sidecar: trials
// <root>/<participant>/session_<k>/eval_<r>_angles.bin  int16 LE centidegrees (pitch, yaw) per frame
//
// See docs/canonical_format.md for the sidecar grammar.

struct LoadedDataset {
  std::vector<SessionDataset> sessions;  // sorted by participant, then session index
  std::string checksum;                  // SHA-256 of MANIFEST
};

LoadedDataset load_canonical(const std::filesystem::path& root);

/// Writes every session plus MANIFEST. Samples must be integers within int16 range.
/// Returns the dataset checksum.
std::string write_canonical(const std::vector<SessionDataset>& sessions,
                            const std::filesystem::path& root);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Best-effort adapter: <src>/<participant>/session_<k>/cycle_<c>.csv, one row per
/// sample with 10 channel columns and a gesture column. Gesture boundaries are
/// taken from label changes.
std::vector<SessionDataset> import_csv_tree(const std::filesystem::path& src,
                                            double gesture_seconds = 5.0);

// --- synthesis --------------------------------------------------------------------

struct SynthSpec {
  int num_participants = 1;
  int num_sessions = 3;
  std::uint64_t seed = 1;
  int cycles = 4;
  double gesture_seconds = 5.0;
  int eval_runs_per_session = 1;
  int eval_trials = 42;
  double eval_trial_seconds = 5.0;
  double days_between_sessions = 7.0;
  double amplitude = 2000.0;  // ADC counts of a unit envelope

  // dynamic factors
  double drift_per_day = 0.03;        // systematic template change, linear in days
  double session_jitter = 0.1;        // per-session transient template perturbation
  double gain_drift_per_day = 0.0;    // overall amplitude factor (1 + g * days)
  double shift_sd_channels = 0.6;     // electrode shift per re-donning; session 1 is 0
  std::vector<double> session_shifts; // explicit shifts (channels), overrides the draw
  double natural_intensity_mean = 0.4343;
  double natural_intensity_sd = 0.2302;
  bool vary_evaluation_intensity = true;
  double noise_level = 0.05;          // additive floor relative to amplitude
  double noise_growth_per_day = 0.01;
  double position_gain = 0.3;
  double yaw_depression_start_deg = 40.0;
  double yaw_depression_shift = 2.0;  // extra channel shift reached at 70 deg yaw

  /// Optional explicit activation templates, 11 rows of 10 channels.
  std::vector<std::vector<double>> templates;

  /// Throws UsageError naming the offending field.
  void validate() const;
};

/// Pure function of the spec: identical specs give identical sessions.
std::vector<SessionDataset> synthesize(const SynthSpec& spec);

/// Activation templates (11 x 10) for one participant.
std::vector<std::array<double, kArmbandChannels>> participant_templates(const SynthSpec& spec,
                                                                        int participant);

/// Circular rotation of a channel profile by a possibly fractional offset
/// (linear interpolation between neighbouring electrodes).
std::array<double, kArmbandChannels> rotate_channels(const std::array<double, kArmbandChannels>& v,
                                                     double offset);

/// Per-channel multiplicative gain for an arm orientation.
std::array<double, kArmbandChannels> position_modulation(const SynthSpec& spec, double pitch_deg,
                                                         double yaw_deg);

// --- windows ------------------------------------------------------------------------

struct WindowContext {
  int cycle = 0;         // 1..4 for training-session windows, 0 for evaluation windows
  int run = -1;          // evaluation run index
  int trial = -1;        // evaluation trial index
  double time_since_cue_s = 0.0;
  double intensity_ratio = std::numeric_limits<double>::quiet_NaN();
  int requested_level = 0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;

  friend bool operator==(const WindowContext&, const WindowContext&) = default;
};

struct WindowExample {
  std::span<const float> samples;  // channels x length, channel-major
  int label = 0;
  WindowContext context;
};

/// Columnar storage for many windows of equal shape.
struct WindowSet {
  std::size_t channels = kArmbandChannels;
  std::size_t length = 150;
  std::vector<float> samples;
  std::vector<int> labels;
  std::vector<WindowContext> context;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t window_size() const { return channels * length; }
  std::span<const float> window(std::size_t i) const {
    return {samples.data() + i * window_size(), window_size()};
  }
  WindowExample example(std::size_t i) const { return {window(i), labels[i], context[i]}; }
  void push(std::span<const float> values, int label, const WindowContext& ctx);
  void append(const WindowSet& other);
  WindowSet subset(std::span<const std::size_t> indices) const;
};

struct PreprocessSpec {
  FilterSpec filter;
  WindowSpec window;
};

struct SessionWindows {
  std::string participant;
  int session_index = 1;
  double day_offset = 0.0;
  WindowSet train;          // cycles 1 and 3
  WindowSet test;           // cycle 4
  WindowSet max_intensity;  // cycle 2
  WindowSet evaluation;     // every evaluation run
};

/// Filters each recording causally over its full length, then windows each
/// gesture segment (or evaluation trial) separately so no window straddles a cue.
SessionWindows preprocess_session(const SessionDataset& session, const PreprocessSpec& spec);

struct IntensityReference {
  std::array<double, kNumGestures> max_mav{};  // per gesture, from cycle 2
};

/// Mean scalar MAV of each gesture's cycle-2 windows.
IntensityReference intensity_reference(const SessionWindows& first_session);

/// MAV(window) / reference(gesture). Throws UsageError for a non-positive reference.
double intensity_ratio(std::span<const float> window, std::size_t channels,
                       const IntensityReference& reference, int gesture);

/// 1 below 25 %, 2 for 25-45 % inclusive, 3 above 45 %.
int label_intensity_level(double ratio);

/// Fills context.intensity_ratio for every window using its label.
void annotate_intensity(WindowSet& windows, const IntensityReference& reference);

}  // namespace emgtl
