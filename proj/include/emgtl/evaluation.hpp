#pragma once

// Accuracy bookkeeping, paired statistics, transition trimming, binned
// analyses and the per-day MAV/MSA comparison.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgtl/datasets.hpp"

namespace emgtl {

/// correct / total. Throws UsageError on empty or mismatched input.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// mean(a - b) / sd(a - b), sd with n - 1. Throws DegenerateInput("degenerate pairs")
/// when the differences have zero variance.
double cohens_dz(std::span<const double> a, std::span<const double> b);

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;       // pairs left after dropping zero differences
  double p_value = 1.0;    // two-sided
  bool exact = true;
};

/// Zero differences dropped, ties mid-ranked. Exact null distribution for
/// n <= 25, normal approximation with tie correction (no continuity
/// correction) above. Throws DegenerateInput when fewer than 5 non-zero
/// differences remain (including the all-zero case).
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Largest n handled by exact enumeration.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Product-moment correlation. Throws DegenerateInput for zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// Indices of windows whose start lies at least `trim_s` after their cue.
std::vector<std::size_t> trim_transitions(const WindowSet& windows, double trim_s = 1.5);

struct Bin {
  double lo0 = 0, hi0 = 0;  // intensity range, or pitch range
  double lo1 = 0, hi1 = 0;  // yaw range (orientation bins only)
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? double(correct) / double(count) : 0.0; }
};

/// Bins below `min_count` are left out of `bins` (absent, not zero).
struct BinnedAnalysis {
  std::vector<Bin> bins;
  std::size_t min_count = 1;
  std::size_t suppressed_bins = 0;
  std::size_t suppressed_windows = 0;
};

/// Half-open bins [k*w, (k+1)*w) over the intensity ratio. NaN ratios are skipped.
BinnedAnalysis bin_by_intensity(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const double> ratios, double bin_width = 0.05,
                                std::size_t min_count = 1);

/// grid_deg x grid_deg cells over (pitch, yaw).
BinnedAnalysis bin_by_orientation(std::span<const int> predictions, std::span<const int> labels,
                                  std::span<const double> pitch_deg,
                                  std::span<const double> yaw_deg, double grid_deg = 5.0,
                                  std::size_t min_count = 500);

// --- MAV / MSA per day -------------------------------------------------------------

struct DaySummary {
  std::string participant;
  int session_index = 0;
  double day = 0.0;
  std::size_t train_windows = 0;  // cycles 1, 3, 4
  double train_mav_mean = 0.0;
  double train_mav_sd = 0.0;
  double train_msa = 0.0;
  bool train_msa_degenerate = false;
  std::size_t eval_windows = 0;
  double eval_mav_mean = 0.0;
  double eval_mav_sd = 0.0;
  double eval_msa = 0.0;
  bool eval_msa_degenerate = false;
};

struct DayComparison {
  std::string quantity;  // e.g. "train_mav"
  double first_day = 0.0;
  double last_day = 0.0;
  std::size_t pairs = 0;
  std::optional<WilcoxonResult> test;
  std::string note;  // "no change", "insufficient pairs", or empty when tested
};

struct MavMsaReport {
  std::vector<DaySummary> days;
  std::vector<DayComparison> comparisons;  // first vs last session per participant
};

/// Needs at least two sessions; cycle 2 never contributes.
MavMsaReport mav_msa_day_report(const std::vector<SessionWindows>& sessions);

// --- accuracy table -----------------------------------------------------------------

struct AccuracyRow {
  std::string scheme;
  int session = 0;
  std::string participant;
  std::uint64_t seed = 0;
  std::string split;  // "offline" or "evaluation"
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return double(correct) / double(total); }
};

class AccuracyTable {
 public:
  void add(AccuracyRow row);
  const std::vector<AccuracyRow>& rows() const { return rows_; }

  /// Mean over participants (each participant's accuracy first averaged over seeds).
  std::optional<double> mean(const std::string& scheme, int session,
                             const std::string& split = "offline") const;

  /// Per (participant, seed) accuracies in a stable order, for paired tests.
  std::vector<std::pair<std::string, double>> paired(const std::string& scheme, int session,
                                                     const std::string& split = "offline") const;

  std::vector<int> sessions() const;

  /// Rows sorted by scheme, session, participant, seed, split.
  std::string to_tsv() const;

 private:
  std::vector<AccuracyRow> rows_;
};

/// Fixed six-decimal formatting used in every report file.
std::string format_fixed(double value, int decimals = 6);

}  // namespace emgtl
