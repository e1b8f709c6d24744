#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynresp/response.hpp"

namespace dynresp {

/// Linear interpolation of `r` at `lags`; lags outside the curve's range throw.
std::vector<double> resample_linear(const ImpulseResponse& r, std::span<const double> lags);

/// ||T/max|T| - C/max|C|||_2 / ||T/max|T|||_2 on the truth lag grid.
/// `est` is resampled by linear interpolation when its grid differs; truth
/// lags beyond the end of `est` are dropped. A zero `est` gives 1.
double normalized_mse(const ImpulseResponse& truth, const ImpulseResponse& est);
double normalized_mse(std::span<const double> truth, std::span<const double> est);

struct Nadir {
  double time_s = 0.0;
  double value = 0.0;
  bool interior = false;  // false when the minimum sits on either end of the grid
};

/// Global minimum over lags > 0 (earliest on ties), refined by a parabola
/// through the minimum and its two neighbours when it is a local minimum.
Nadir nadir(const ImpulseResponse& r);

/// Least-squares slope of distance against nadir lag, in miles per second.
double propagation_speed(std::span<const double> lags_s, std::span<const double> distances_miles);

struct ModeEstimate {
  double osc_freq_hz = 0.0;
  double damping = 0.0;  // logarithmic decrement per cycle
  int n_peaks = 0;
};

/// Logarithmic-decrement estimate on the linearly detrended curve. Peaks
/// are strict local maxima (troughs: minima) with prominence at least 1% of
/// the largest absolute value. Frequency = (n - 1) / (t_last - t_first) over
/// the maxima; cycle amplitude = peak minus the mean of its adjacent troughs;
/// damping = least-squares slope of -ln(amplitude) against cycle index.
ModeEstimate log_decrement(std::span<const double> values, double step);
ModeEstimate log_decrement(const ImpulseResponse& r);

struct RecoveryReport {
  std::string source;
  std::string target;
  std::string kind;
  std::string relation;
  double normalized_mse = 0.0;  // NaN without a truth curve
  double nadir_time_s = 0.0;
  double nadir_value = 0.0;
  bool nadir_interior = false;
  double est_osc_freq_hz = 0.0;  // NaN when too few cycles
  double est_damping = 0.0;
  double scale_applied = 1.0;
};

/// Metrics for a recovered curve, with normalized MSE against `truth` when given.
RecoveryReport make_report(const ImpulseResponse& est, const ImpulseResponse* truth = nullptr);

/// One row per report.
std::string format_report_csv(const std::vector<RecoveryReport>& reports);

/// Fixed-width table of the reports for terminal output.
std::string format_report_table(const std::vector<RecoveryReport>& reports);

}  // namespace dynresp
