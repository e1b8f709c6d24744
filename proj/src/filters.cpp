#include "dynresp/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "dynresp/error.hpp"

namespace dynresp {

namespace {

void check_cutoff(double cutoff_hz, double fs_hz) {
  require(fs_hz > 0.0, "sample rate must be positive");
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs_hz,
          "cutoff " + std::to_string(cutoff_hz) + " Hz must lie in (0, Nyquist=" +
              std::to_string(0.5 * fs_hz) + " Hz)");
}

}  // namespace

double Biquad::magnitude(double f_hz, double fs_hz) const {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2));
}

namespace {

void run_df2t(const Biquad& q, std::span<double> x, double s1, double s2) {
  const auto [b0, b1, b2, a1, a2] = q;
  for (double& v : x) {
    const double in = v;
    const double out = b0 * in + s1;
    s1 = b1 * in - a1 * out + s2;
    s2 = b2 * in - a2 * out;
    v = out;
  }
}

}  // namespace

void Biquad::apply(std::span<double> x) const { run_df2t(*this, x, 0.0, 0.0); }

void Biquad::apply_steady(std::span<double> x) const {
  if (x.empty()) return;
  const double c = x[0];
  const double y = c * (b0 + b1 + b2) / (1.0 + a1 + a2);
  run_df2t(*this, x, y - b0 * c, b2 * c - a2 * y);
}

BandpassDesign BandpassDesign::make(double low_hz, double high_hz, double fs_hz) {
  require(fs_hz > 0.0, "sample rate must be positive");
  require(low_hz > 0.0 && low_hz < high_hz && high_hz < 0.5 * fs_hz,
          "passband must satisfy 0 < low < high < Nyquist");
  using C = std::complex<double>;
  const double pi = std::numbers::pi;
  const double two_fs = 2.0 * fs_hz;
  const double w_lo = two_fs * std::tan(pi * low_hz / fs_hz);
  const double w_hi = two_fs * std::tan(pi * high_hz / fs_hz);
  const double w0 = std::sqrt(w_lo * w_hi);
  const double bw = w_hi - w_lo;
  // |H|^4 = 1/2 at the edges: (1 + Oc^-4)^2 = 2.
  const double oc = std::pow(std::numbers::sqrt2 - 1.0, -0.25);
  const C p = oc * std::polar(1.0, 0.75 * pi);

  // Prototype pole p maps to the roots of s^2 - p bw s + w0^2.
  const C disc = std::sqrt(p * p * bw * bw - 4.0 * w0 * w0);
  const std::array<C, 2> poles{0.5 * (p * bw + disc), 0.5 * (p * bw - disc)};

  BandpassDesign d;
  for (std::size_t i = 0; i < 2; ++i) {
    const C z = (1.0 + poles[i] / two_fs) / (1.0 - poles[i] / two_fs);
    Biquad& q = d.sections[i];
    q.b0 = 1.0;
    q.b1 = 0.0;
    q.b2 = -1.0;
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
  }
  const double f0 = fs_hz / pi * std::atan(w0 / two_fs);
  for (Biquad& q : d.sections) {
    const double g = 1.0 / q.magnitude(f0, fs_hz);
    q.b0 *= g;
    q.b2 *= g;
  }
  return d;
}

double BandpassDesign::magnitude(double f_hz, double fs_hz) const {
  return sections[0].magnitude(f_hz, fs_hz) * sections[1].magnitude(f_hz, fs_hz);
}

std::vector<double> bandpass_zero_phase(std::span<const double> x, double low_hz, double high_hz,
                                        double fs_hz) {
  const BandpassDesign bp = BandpassDesign::make(low_hz, high_hz, fs_hz);
  const std::size_t n = x.size();
  if (n < 2) return {x.begin(), x.end()};

  const auto want = static_cast<std::size_t>(std::ceil(3.0 * fs_hz / low_hz));
  const std::size_t pad = std::min(n - 1, want);
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  auto pass = [&bp](std::span<double> s) {
    for (const Biquad& q : bp.sections) q.apply_steady(s);
  };
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  pass(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

void one_pole_lowpass(std::span<double> x, double cutoff_hz, double fs_hz, int order) {
  check_cutoff(cutoff_hz, fs_hz);
  require(order >= 1, "filter order must be at least 1");
  if (x.empty()) return;
  const double a = std::exp(-2.0 * std::numbers::pi * cutoff_hz / fs_hz);
  for (int s = 0; s < order; ++s) {
    double y = x[0];
    for (double& v : x) {
      y = (1.0 - a) * v + a * y;
      v = y;
    }
  }
}

double one_pole_lowpass_magnitude(double f_hz, double cutoff_hz, double fs_hz, int order) {
  const double a = std::exp(-2.0 * std::numbers::pi * cutoff_hz / fs_hz);
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  return std::pow(std::abs((1.0 - a) / (1.0 - a * z1)), order);
}

}  // namespace dynresp
