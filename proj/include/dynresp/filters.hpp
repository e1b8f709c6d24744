#pragma once

#include <array>
#include <span>
#include <vector>

namespace dynresp {

/// Two-pole/two-zero section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  double magnitude(double f_hz, double fs_hz) const;

  /// Direct form II transposed, zero initial state.
  void apply(std::span<double> x) const;
  /// Same, with the state started at steady state for a constant input
  /// equal to x[0].
  void apply_steady(std::span<double> x) const;
};

/// Order-4 Butterworth bandpass (a second-order low-pass prototype under
/// the bandpass transform), realized as two biquads via the bilinear
/// transform with prewarped edges. The prototype is widened so that the
/// forward-backward response |H|^2 is at half power on `low_hz` and
/// `high_hz`, with unit gain at the geometric centre.
struct BandpassDesign {
  std::array<Biquad, 2> sections;

  static BandpassDesign make(double low_hz, double high_hz, double fs_hz);
  double magnitude(double f_hz, double fs_hz) const;
};

/// Forward-backward (zero-phase) bandpass with odd-reflection padding at
/// both ends. Effective magnitude response is |H|^2.
std::vector<double> bandpass_zero_phase(std::span<const double> x, double low_hz, double high_hz,
                                        double fs_hz);

/// Cascade of `order` identical causal one-pole low-pass sections
/// y[n] = (1 - a) x[n] + a y[n-1], a = exp(-2 pi fc / fs), each started
/// at the first input sample so a constant input passes unchanged.
void one_pole_lowpass(std::span<double> x, double cutoff_hz, double fs_hz, int order);

/// |H(f)| of the cascade above.
double one_pole_lowpass_magnitude(double f_hz, double cutoff_hz, double fs_hz, int order);

}  // namespace dynresp
