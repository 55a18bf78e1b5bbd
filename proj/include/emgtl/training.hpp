#pragma once

// Training loops (supervised, ADANN pre-training, TADANN target training)
// and the four long-term calibration schemes.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgtl/adam.hpp"
#include "emgtl/datasets.hpp"
#include "emgtl/model.hpp"

namespace emgtl {

struct TrainSpec {
  double lr = 0.002233;
  std::size_t batch_size = 512;
  double validation_fraction = 0.10;
  int early_stop_patience = 10;
  double anneal_factor = 5.0;
  int anneal_patience = 5;
  int max_epochs = 500;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> split_seed;  // validation split; defaults to seed
  double lambda = 1.0;              // gradient-reversal scale
  double domain_loss_weight = 1.0;  // classification + weight * domain

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double lr = 0.0;
  bool improved = false;
  bool annealed = false;  // lr was divided after this epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation_loss = 0.0;
  bool early_stopped = false;
};

/// One ADANN optimisation step, as seen by a tracer.
struct AdannStep {
  std::size_t step = 0;
  std::string source_key;
  std::string target_key;
  int source_domain_label = 0;
  int target_domain_label = 1;
  std::span<const std::size_t> source_indices;  // into the session's training windows
  std::span<const std::size_t> target_indices;
};

/// Optional observers. None of them may mutate the training state.
struct TrainHooks {
  std::function<void(const WindowSet& data, std::span<const std::size_t> batch)> on_batch;
  std::function<void(const AdannStep&)> on_adann_step;
  std::function<void()> after_step;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per-class seeded shuffle; round(fraction * n_c) of each class goes to
/// validation. Throws DataError if any class present ends up with no training window.
Split stratified_split(std::span<const int> labels, double fraction, std::uint64_t seed);

/// Stacks the selected windows into [B, channels, length].
template <typename Real>
Tensor<Real> make_batch(const WindowSet& data, std::span<const std::size_t> indices);

std::vector<int> batch_labels(const WindowSet& data, std::span<const std::size_t> indices);

/// Mean classification loss (inference mode) over `indices`, in chunks.
template <typename Real>
double evaluate_loss(const TcnModel<Real>& model, const WindowSet& data,
                     std::span<const std::size_t> indices, const std::string& key,
                     std::size_t chunk = 1024);

// --- single-step gradient pieces ---------------------------------------------

/// Forward (kTrain) and backward of the classification loss on one batch.
/// Gradients accumulate; returns the loss.
template <typename Real>
double supervised_accumulate(TcnModel<Real>& model, const Tensor<Real>& x,
                             std::span<const int> labels, const std::string& key,
                             kernel::Rng& rng);

/// The ADANN gradient of one (source, target) batch pair. Source: classification
/// loss plus domain loss with label 0, BN bank updated. Target: domain loss with
/// label 1, normalised by its own batch statistics without touching its bank.
/// The domain loss is the mean over both batches. Returns the total loss.
template <typename Real>
double adann_accumulate(TcnModel<Real>& model, const Tensor<Real>& xs, std::span<const int> ys,
                        const std::string& source_key, const Tensor<Real>& xt,
                        const std::string& target_key, double lambda, double domain_weight,
                        kernel::Rng& rng);

// --- loops -------------------------------------------------------------------

/// Adds the BN bank for `key` if missing, then trains with early stopping and
/// restores the best-validation weights.
template <typename Real>
TrainHistory train_supervised(TcnModel<Real>& model, const WindowSet& data, const std::string& key,
                              const TrainSpec& spec, const TrainHooks& hooks = {});

struct DomainData {
  std::string key;
  const WindowSet* windows = nullptr;
};

/// Multi-domain adversarial pre-training over at least two sessions.
template <typename Real>
TrainHistory adann_pretrain(TcnModel<Real>& model, const std::vector<DomainData>& sessions,
                            const TrainSpec& spec, const TrainHooks& hooks = {});

/// Trains target network, source BN affine and fusion coefficients on the
/// calibration session; coefficients are clamped after every step.
template <typename Real>
TrainHistory train_tadann(TadannModel<Real>& model, const WindowSet& data, const TrainSpec& spec,
                          const TrainHooks& hooks = {});

// --- calibration schemes ---------------------------------------------------------

enum class CalibrationScheme { kNoCalibration, kRecalibration, kDelayedCalibration, kTadann };

std::string scheme_name(CalibrationScheme scheme);
CalibrationScheme parse_scheme(const std::string& name);
const std::vector<CalibrationScheme>& all_schemes();

/// The sessions of one participant in date order.
struct SessionPlan {
  std::string participant;
  std::vector<SessionWindows> sessions;

  void validate() const;
};

std::string session_key(int session_index);

/// The network a scheme uses to classify one session.
struct SessionModel {
  std::optional<TcnModel<float>> tcn;
  std::optional<TadannModel<float>> tadann;
  std::string key;  // BN bank used at inference

  std::vector<int> predict(const WindowSet& windows, std::size_t chunk = 1024) const;
};

struct SessionResult {
  int session_index = 0;
  bool defined = false;  // false where the scheme has no model for this session
  double offline_accuracy = 0.0;
  std::vector<int> test_predictions;        // cycle 4
  std::vector<int> evaluation_predictions;  // every evaluation window
};

struct SchemeOutcome {
  CalibrationScheme scheme = CalibrationScheme::kNoCalibration;
  std::vector<SessionResult> sessions;
  std::vector<SessionModel> models;  // parallel to sessions; empty model where undefined
  std::map<std::string, TrainHistory> histories;  // stage name -> history
};

struct SchemeRunOptions {
  TcnConfig model;
  TrainSpec train;
  TrainHooks hooks;
};

/// Runs several schemes on one plan, training shared stages once. Each stage
/// draws its seeds from (train.seed, stage), so the results equal separate runs.
std::map<CalibrationScheme, SchemeOutcome> run_schemes(const SessionPlan& plan,
                                                       std::span<const CalibrationScheme> schemes,
                                                       const SchemeRunOptions& options);

SchemeOutcome run_calibration_scheme(const SessionPlan& plan, CalibrationScheme scheme,
                                     const SchemeRunOptions& options);

/// Seed of a named training stage.
std::uint64_t stage_seed(std::uint64_t base, const std::string& stage, int session_index);

}  // namespace emgtl
