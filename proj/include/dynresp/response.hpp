#pragma once

#include <string>
#include <vector>

namespace dynresp {

/// A lag-indexed response curve, either model-based or recovered from data.
/// Lags start at 0 and are uniformly spaced.
struct ImpulseResponse {
  std::vector<double> lags_s;
  std::vector<double> values;
  std::string source;    // e.g. "2"
  std::string target;    // e.g. "1" or "7-8"
  std::string kind;      // "frequency", "angle", "bus_angle", "line_flow"
  std::string relation;  // recovery relation tag, empty for model curves
  double scale_applied = 1.0;

  std::size_t size() const { return values.size(); }
  double lag_step() const { return lags_s.size() > 1 ? lags_s[1] - lags_s[0] : 0.0; }
};

/// Uniform lag grid 0, step, 2*step, ... with `count` points.
std::vector<double> uniform_lags(double step, std::size_t count);

}  // namespace dynresp
