#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynresp/evaluate.hpp"
#include "dynresp/grid_model.hpp"
#include "dynresp/modal.hpp"
#include "dynresp/recovery.hpp"
#include "dynresp/simulate.hpp"

namespace dynresp {

struct RecoveryPair {
  std::string source;  // channel name; its location is the input machine
  std::string target;  // channel name
  ResponseKind response = ResponseKind::kFrequency;
};

enum class TruthSource { kModal, kSimulated };

/// A reproducible end-to-end run, read from a key=value file.
///
/// Keys: name, case (path relative to the spec file), damping
/// ("uniform <g>" or "ratios <g1> <g2> ..."), seed, truth (modal|simulated),
/// ambient.<field> (duration_s, sample_rate_hz, dt, input_mode, alpha,
/// measurement_noise_rel, freq_filter_on, freq_filter_cutoff_hz,
/// freq_filter_order, modulation_period_s, modulation_depth, outputs),
/// recovery.<key> (any RecoveryConfig key), repeated
/// `pair=<source> <target> <frequency|angle>`, nadir.enabled, nadir.sign,
/// write_trace.
struct ExperimentSpec {
  std::string name;
  std::filesystem::path case_path;
  std::optional<double> uniform_gamma;
  std::vector<double> damping_ratios;
  std::uint64_t seed = 0;
  TruthSource truth = TruthSource::kModal;
  AmbientConfig ambient;
  double dt = 0.01;
  RecoveryConfig recovery;
  std::vector<RecoveryPair> pairs;
  bool nadir_enabled = false;
  double nadir_sign = 1.0;  // nadir is taken on sign * curve
  bool write_trace = false;

  static ExperimentSpec parse(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& origin = "<string>");
  static ExperimentSpec load(const std::filesystem::path& path);
};

struct NadirRow {
  std::string target;
  double distance_miles = 0.0;
  double recovered_nadir_s = 0.0;
  double model_nadir_s = 0.0;
  bool interior = false;
};

struct ExperimentResult {
  std::vector<ImpulseResponse> recovered;
  std::vector<ImpulseResponse> truth;
  std::vector<RecoveryReport> reports;
  std::vector<ModeEstimate> model_modes;  // per pair; NaN fields when unavailable
  std::vector<NadirRow> nadir_rows;
  std::optional<double> propagation_speed_mi_s;
  std::string summary;
};

/// Builds the case described by the spec (file plus damping override).
GridCase experiment_case(const ExperimentSpec& spec);

/// Model-side response for one pair: closed-form modal curves under
/// uniform damping, or exact impulse simulation otherwise.
ImpulseResponse truth_response(const GridCase& c, TruthSource truth, const RecoveryPair& pair,
                               std::span<const double> lags);

/// Runs simulation, recovery and evaluation, writing report.csv,
/// recovered.csv, truth.csv, modes.csv, summary.txt (and nadir_lag.csv,
/// trace.csv when enabled) under `out_dir`.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

/// Runs the bundled experiment `<data_dir>/experiments/<name>.exp`.
ExperimentResult reproduce(std::string_view name, const std::filesystem::path& out_dir,
                           std::optional<std::uint64_t> seed, const std::filesystem::path& data_dir);

std::vector<std::string> bundled_experiments(const std::filesystem::path& data_dir);

}  // namespace dynresp
