#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dynresp/grid_model.hpp"
#include "dynresp/response.hpp"
#include "dynresp/trace.hpp"

namespace dynresp {

/// Exact zero-order-hold stepping of x' = A x + B u for the state
/// x = (delta, omega), with u entering the power balance of each machine.
/// The matrix exponential is computed once at construction.
class LtiStepper {
 public:
  LtiStepper(const GridCase& c, double dt);

  int n_machines() const { return n_; }
  double dt() const { return dt_; }

  const Eigen::VectorXd& state() const { return x_; }
  void set_state(const Eigen::VectorXd& x);
  Eigen::Ref<const Eigen::VectorXd> angles() const { return x_.head(n_); }
  Eigen::Ref<const Eigen::VectorXd> speeds() const { return x_.tail(n_); }

  /// Advances one step holding `u` constant over it.
  void step(const Eigen::VectorXd& u);
  void step_free();

  const Eigen::MatrixXd& Ad() const { return ad_; }
  const Eigen::MatrixXd& Bd() const { return bd_; }

 private:
  int n_;
  double dt_;
  Eigen::MatrixXd ad_;
  Eigen::MatrixXd bd_;
  Eigen::VectorXd x_;
  Eigen::VectorXd scratch_;
};

/// Continuous-time state matrices A (2N x 2N) and B (2N x N).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> state_space(const GridCase& c);

/// Response to a unit-area pulse of height 1/dt at machine `k`, held over
/// [-dt/2, dt/2). Samples start at t = -dt/2 (zero state), so the sample
/// times line up with the impulse instant. Emits rotor_angle and rotor_freq
/// channels for every machine.
SignalTrace simulate_impulse(const GridCase& c, int k, double dt, double horizon_s);

/// Response of `target` to an ideal impulse u = e_k delta(t), sampled at
/// lags 0, dt, ..., (count-1) dt by exact stepping from x(0+) = (0, M^-1 e_k).
/// Valid for any damping, so it serves as truth where no closed form exists.
ImpulseResponse simulated_impulse_response(const GridCase& c, int k, const Channel& target,
                                           double dt, std::size_t count);

enum class InputMode { kGeneratorWhite, kLoadPerturb };

struct AmbientConfig {
  double duration_s = 600.0;
  InputMode input_mode = InputMode::kGeneratorWhite;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  double sample_rate_hz = 100.0;  // output rate; must be an integer fraction of 1/dt
  double measurement_noise_rel = 2e-5;
  bool freq_filter_on = false;
  double freq_filter_cutoff_hz = 1.5;
  int freq_filter_order = 2;
  // N x p matrix mapping p independent load perturbations onto the machines'
  // power balance. Empty means identity (one perturbation per machine).
  Eigen::MatrixXd load_input_matrix;
  // Optional periodic amplitude modulation of the input noise,
  // u(t) *= 1 + depth * sin(2 pi t / period). Disabled when period <= 0.
  double modulation_period_s = 0.0;
  double modulation_depth = 0.5;
  // Bus-angle targets emit bus_angle and bus_freq channels; lines emit line_flow.
  std::vector<OutputSpec> outputs;
  bool record_inputs = false;

  void validate() const;
};

/// Ambient (white-noise driven) response. Each integration step draws
/// Gaussian input with covariance Sigma/dt, Sigma = alpha M for
/// kGeneratorWhite and alpha B B^T for kLoadPerturb.
SignalTrace simulate_ambient(const GridCase& c, const AmbientConfig& cfg, double dt);

/// Appends bus_angle / line_flow channels computed sample-wise from the
/// rotor_angle channels, plus bus_freq channels when rotor_freq is present.
SignalTrace map_outputs(const SignalTrace& trace, const GridCase& c,
                        const std::vector<OutputSpec>& targets);

/// Surrogate PMU frequency processing: frequency channels pass through a
/// causal one-pole low-pass cascade.
SignalTrace degrade_frequency(const SignalTrace& trace, double cutoff_hz, int order);

/// Adds white noise with std = rel * (channel std) to every non-input channel.
SignalTrace add_measurement_noise(const SignalTrace& trace, double rel, std::uint64_t seed);

}  // namespace dynresp
