#pragma once

// The `emgtl` command-line tool. Everything lives here so tests can drive the
// commands in-process.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emgtl/datasets.hpp"
#include "emgtl/model.hpp"
#include "emgtl/training.hpp"

namespace emgtl::cli {

struct EvaluationOptions {
  double trim_transitions_s = 1.5;
  double intensity_bin_width = 0.05;
  double orientation_grid_deg = 5.0;
  std::size_t orientation_min_count = 500;
};

/// Resolved run configuration: defaults, then the JSON file, then flags.
struct RunConfig {
  std::optional<std::filesystem::path> dataset_path;
  std::optional<SynthSpec> synth;
  std::vector<CalibrationScheme> schemes = all_schemes();
  std::vector<std::uint64_t> seeds{1};
  TrainSpec train;
  TcnConfig model;
  PreprocessSpec preprocess;
  EvaluationOptions evaluation;
  std::filesystem::path output;
  bool save_checkpoints = true;

  /// Throws UsageError naming the offending field.
  void validate() const;

  /// Canonical JSON (sorted keys, every field present). Equal configs give equal
  /// text. The output directory is left out, so a report doesn't depend on where
  /// it was written.
  std::string canonical_json() const;
};

/// Parses a JSON config. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

SynthSpec parse_synth_spec(const std::string& json_text);

/// `key=value` lines for the preprocessing parameters, and their SHA-256.
std::string preprocess_text(const PreprocessSpec& spec);
std::string preprocess_hash(const PreprocessSpec& spec);

/// Runs one command line (args[0] is the subcommand). Returns the exit code:
/// 0 success, 1 usage error, 2 data error, 3 numerical fault.
int run(const std::vector<std::string>& args);

int main(int argc, char** argv);

}  // namespace emgtl::cli
