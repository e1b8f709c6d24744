#include "dynresp/simulate.hpp"

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "dynresp/error.hpp"
#include "dynresp/filters.hpp"
#include "text_util.hpp"

namespace dynresp {

using detail::format_double;

namespace {

constexpr double kBlowUpNorm = 1e12;

void check_finite(const Eigen::VectorXd& x, long long step) {
  if (!x.allFinite() || x.norm() > kBlowUpNorm) {
    fail(ErrorCode::kNumeric, "unstable integration: state norm blew up at step " + std::to_string(step));
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string machine_id(int i) { return std::to_string(i + 1); }

void add_rotor_channels(SignalTrace& tr, const Eigen::MatrixXd& delta, const Eigen::MatrixXd& omega) {
  const auto n = delta.rows();
  tr.data.resize(2 * n, delta.cols());
  tr.data.topRows(n) = delta;
  tr.data.bottomRows(n) = omega;
  for (int i = 0; i < n; ++i) tr.channels.push_back({ChannelKind::kRotorAngle, machine_id(i)});
  for (int i = 0; i < n; ++i) tr.channels.push_back({ChannelKind::kRotorFreq, machine_id(i)});
}

void append_outputs(SignalTrace& tr, const GridCase& c, const std::vector<OutputSpec>& targets,
                    const Eigen::MatrixXd& delta, const Eigen::MatrixXd* omega) {
  if (targets.empty()) return;
  const Eigen::MatrixXd rows = output_matrix(c, targets);
  const Eigen::MatrixXd angles = rows * delta;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const OutputSpec& t = targets[r];
    if (t.kind == OutputKind::kLineFlow) {
      tr.add_channel({ChannelKind::kLineFlow, t.location()}, angles.row(ri));
    } else {
      tr.add_channel({ChannelKind::kBusAngle, t.location()}, angles.row(ri));
    }
  }
  if (omega == nullptr) return;
  const Eigen::MatrixXd freqs = rows * *omega;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const OutputSpec& t = targets[r];
    if (t.kind != OutputKind::kBusAngle) continue;
    tr.add_channel({ChannelKind::kBusFreq, t.location()}, freqs.row(static_cast<Eigen::Index>(r)));
  }
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> state_space(const GridCase& c) {
  const int n = c.n_machines();
  const Eigen::VectorXd inv_m = c.inertia.cwiseInverse();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n).setIdentity();
  A.bottomLeftCorner(n, n) = -(inv_m.asDiagonal() * c.jacobian);
  A.bottomRightCorner(n, n) = -Eigen::MatrixXd(inv_m.cwiseProduct(c.damping).asDiagonal());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n, n);
  B.bottomRows(n) = inv_m.asDiagonal();
  return {A, B};
}

LtiStepper::LtiStepper(const GridCase& c, double dt) : n_(c.n_machines()), dt_(dt) {
  require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
  require(n_ >= 1, "case has no machines");
  const auto [A, B] = state_space(c);
  const int s = 2 * n_;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(s + n_, s + n_);
  aug.topLeftCorner(s, s) = A * dt;
  aug.topRightCorner(s, n_) = B * dt;
  const Eigen::MatrixXd e = aug.exp();
  if (!e.allFinite()) fail(ErrorCode::kNumeric, "matrix exponential is not finite");
  ad_ = e.topLeftCorner(s, s);
  bd_ = e.topRightCorner(s, n_);
  x_ = Eigen::VectorXd::Zero(s);
  scratch_.resize(s);
}

void LtiStepper::set_state(const Eigen::VectorXd& x) {
  require(x.size() == 2 * n_, "state has wrong dimension");
  x_ = x;
}

void LtiStepper::step(const Eigen::VectorXd& u) {
  scratch_.noalias() = ad_ * x_;
  scratch_.noalias() += bd_ * u;
  x_.swap(scratch_);
}

void LtiStepper::step_free() {
  scratch_.noalias() = ad_ * x_;
  x_.swap(scratch_);
}

SignalTrace simulate_impulse(const GridCase& c, int k, double dt, double horizon_s) {
  const int n = c.n_machines();
  require(k >= 0 && k < n, "source machine " + std::to_string(k + 1) + " out of range (1.." +
                               std::to_string(n) + ")");
  require(dt > 0.0, "time step must be positive");
  require(horizon_s >= dt, "horizon must be at least one time step");

  LtiStepper stepper(c, dt);
  const auto last = static_cast<long long>(std::ceil((horizon_s + 0.5 * dt) / dt - 1e-9));
  const Eigen::Index count = last + 1;
  Eigen::MatrixXd delta(n, count), omega(n, count);
  delta.col(0).setZero();
  omega.col(0).setZero();
  const Eigen::VectorXd pulse = Eigen::VectorXd::Unit(n, k) / dt;
  for (Eigen::Index j = 1; j < count; ++j) {
    if (j == 1) {
      stepper.step(pulse);
    } else {
      stepper.step_free();
    }
    check_finite(stepper.state(), j);
    delta.col(j) = stepper.angles();
    omega.col(j) = stepper.speeds();
  }

  SignalTrace tr;
  tr.sample_rate_hz = 1.0 / dt;
  tr.start_time_s = -0.5 * dt;
  add_rotor_channels(tr, delta, omega);
  tr.metadata["kind"] = "impulse";
  tr.metadata["source"] = machine_id(k);
  tr.metadata["dt"] = format_double(dt);
  tr.metadata["horizon_s"] = format_double(horizon_s);
  return tr;
}

ImpulseResponse simulated_impulse_response(const GridCase& c, int k, const Channel& target,
                                           double dt, std::size_t count) {
  const int n = c.n_machines();
  require(k >= 0 && k < n, "source machine " + std::to_string(k + 1) + " out of range");
  require(count >= 1, "response needs at least one lag");
  Eigen::RowVectorXd angle_row, freq_row;
  switch (target.kind) {
    case ChannelKind::kRotorAngle:
    case ChannelKind::kRotorFreq: {
      const int l = static_cast<int>(detail::parse_int(target.location, "machine id")) - 1;
      require(l >= 0 && l < n, "target machine " + target.location + " out of range");
      angle_row = Eigen::RowVectorXd::Unit(n, l);
      break;
    }
    case ChannelKind::kBusAngle:
    case ChannelKind::kBusFreq:
      angle_row = output_matrix(c, {OutputSpec::parse("bus:" + target.location)});
      break;
    case ChannelKind::kLineFlow:
      angle_row = output_matrix(c, {OutputSpec::parse("line:" + target.location)});
      break;
    case ChannelKind::kInput:
      fail(ErrorCode::kInvalidArgument, "input channels have no impulse response");
  }
  const bool freq = is_freq_kind(target.kind);

  LtiStepper stepper(c, dt);
  // State just after an ideal impulse u = e_k delta(t).
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2 * n);
  x0(n + k) = 1.0 / c.inertia(k);
  stepper.set_state(x0);

  ImpulseResponse r;
  r.lags_s = uniform_lags(dt, count);
  r.values.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    if (j > 0) {
      stepper.step_free();
      check_finite(stepper.state(), static_cast<long long>(j));
    }
    r.values[j] = freq ? angle_row.dot(stepper.speeds()) : angle_row.dot(stepper.angles());
  }
  r.source = machine_id(k);
  r.target = target.location;
  r.kind = std::string(to_string(target.kind));
  return r;
}

void AmbientConfig::validate() const {
  require(duration_s > 0.0, "duration must be positive");
  require(alpha > 0.0, "alpha must be positive");
  require(sample_rate_hz > 0.0, "sample rate must be positive");
  require(measurement_noise_rel >= 0.0, "measurement noise must be nonnegative");
  require(modulation_depth >= 0.0 && modulation_depth <= 1.0, "modulation depth must lie in [0, 1]");
  if (freq_filter_on) {
    require(freq_filter_order >= 1, "filter order must be at least 1");
    require(freq_filter_cutoff_hz > 0.0 && freq_filter_cutoff_hz < 0.5 * sample_rate_hz,
            "frequency filter cutoff must lie in (0, Nyquist)");
  }
}

SignalTrace simulate_ambient(const GridCase& c, const AmbientConfig& cfg, double dt) {
  cfg.validate();
  require(dt > 0.0, "time step must be positive");
  const int n = c.n_machines();
  const double ratio = 1.0 / (cfg.sample_rate_hz * dt);
  const auto decimation = static_cast<long long>(std::llround(ratio));
  require(decimation >= 1 && std::abs(ratio - static_cast<double>(decimation)) < 1e-6,
          "sample period must be an integer multiple of the time step");
  const auto n_steps = static_cast<long long>(std::llround(cfg.duration_s / dt));
  const Eigen::Index n_samples = n_steps / decimation;
  require(n_samples >= 2, "duration too short for the sample rate");

  Eigen::MatrixXd input_map;
  if (cfg.input_mode == InputMode::kGeneratorWhite) {
    input_map = (cfg.alpha * c.inertia).cwiseSqrt().asDiagonal();
  } else {
    const Eigen::MatrixXd bin = cfg.load_input_matrix.size() == 0
                                    ? Eigen::MatrixXd::Identity(n, n)
                                    : cfg.load_input_matrix;
    require(bin.rows() == n, "load input matrix must have one row per machine");
    input_map = std::sqrt(cfg.alpha) * bin;
  }
  input_map /= std::sqrt(dt);
  const Eigen::Index p = input_map.cols();

  LtiStepper stepper(c, dt);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(p), u(n);
  Eigen::MatrixXd delta(n, n_samples), omega(n, n_samples), inputs;
  if (cfg.record_inputs) inputs.resize(n, n_samples);
  const bool modulate = cfg.modulation_period_s > 0.0;
  const double two_pi = 2.0 * std::acos(-1.0);

  long long step = 0;
  for (Eigen::Index j = 0; j < n_samples; ++j) {
    delta.col(j) = stepper.angles();
    omega.col(j) = stepper.speeds();
    for (long long s = 0; s < decimation; ++s, ++step) {
      for (Eigen::Index i = 0; i < p; ++i) z(i) = normal(rng);
      u.noalias() = input_map * z;
      if (modulate) {
        const double t = static_cast<double>(step) * dt;
        u *= 1.0 + cfg.modulation_depth * std::sin(two_pi * t / cfg.modulation_period_s);
      }
      if (s == 0 && cfg.record_inputs) inputs.col(j) = u;
      stepper.step(u);
    }
    check_finite(stepper.state(), step);
  }

  SignalTrace tr;
  tr.sample_rate_hz = cfg.sample_rate_hz;
  tr.start_time_s = 0.0;
  add_rotor_channels(tr, delta, omega);
  append_outputs(tr, c, cfg.outputs, delta, &omega);
  if (cfg.measurement_noise_rel > 0.0) {
    tr = add_measurement_noise(tr, cfg.measurement_noise_rel, mix_seed(cfg.seed, 1));
  }
  if (cfg.freq_filter_on) {
    tr = degrade_frequency(tr, cfg.freq_filter_cutoff_hz, cfg.freq_filter_order);
  }
  if (cfg.record_inputs) {
    for (int i = 0; i < n; ++i) tr.add_channel({ChannelKind::kInput, machine_id(i)}, inputs.row(i));
  }

  tr.metadata["kind"] = "ambient";
  tr.metadata["seed"] = std::to_string(cfg.seed);
  tr.metadata["dt"] = format_double(dt);
  tr.metadata["duration_s"] = format_double(cfg.duration_s);
  tr.metadata["alpha"] = format_double(cfg.alpha);
  tr.metadata["input_mode"] =
      cfg.input_mode == InputMode::kGeneratorWhite ? "generator_white" : "load_perturb";
  tr.metadata["measurement_noise_rel"] = format_double(cfg.measurement_noise_rel);
  tr.metadata["freq_filter_on"] = cfg.freq_filter_on ? "true" : "false";
  if (cfg.freq_filter_on) {
    tr.metadata["freq_filter_cutoff_hz"] = format_double(cfg.freq_filter_cutoff_hz);
    tr.metadata["freq_filter_order"] = std::to_string(cfg.freq_filter_order);
  }
  if (modulate) {
    tr.metadata["modulation_period_s"] = format_double(cfg.modulation_period_s);
    tr.metadata["modulation_depth"] = format_double(cfg.modulation_depth);
  }
  return tr;
}

SignalTrace map_outputs(const SignalTrace& trace, const GridCase& c,
                        const std::vector<OutputSpec>& targets) {
  const int n = c.n_machines();
  Eigen::MatrixXd delta(n, trace.n_samples());
  Eigen::MatrixXd omega(n, trace.n_samples());
  bool have_freq = true;
  for (int i = 0; i < n; ++i) {
    delta.row(i) = trace.data.row(trace.index_of("rotor_angle:" + machine_id(i)));
    if (auto f = trace.find("rotor_freq:" + machine_id(i))) {
      omega.row(i) = trace.data.row(*f);
    } else {
      have_freq = false;
    }
  }
  SignalTrace out = trace;
  append_outputs(out, c, targets, delta, have_freq ? &omega : nullptr);
  return out;
}

SignalTrace degrade_frequency(const SignalTrace& trace, double cutoff_hz, int order) {
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * trace.sample_rate_hz,
          "cutoff " + format_double(cutoff_hz) + " Hz must lie in (0, Nyquist=" +
              format_double(0.5 * trace.sample_rate_hz) + " Hz)");
  require(order >= 1, "filter order must be at least 1");
  SignalTrace out = trace;
  std::vector<double> buf(static_cast<std::size_t>(trace.n_samples()));
  for (int i = 0; i < out.n_channels(); ++i) {
    if (!is_freq_kind(out.channels[i].kind)) continue;
    for (Eigen::Index j = 0; j < out.n_samples(); ++j) buf[j] = out.data(i, j);
    one_pole_lowpass(buf, cutoff_hz, trace.sample_rate_hz, order);
    for (Eigen::Index j = 0; j < out.n_samples(); ++j) out.data(i, j) = buf[j];
  }
  return out;
}

SignalTrace add_measurement_noise(const SignalTrace& trace, double rel, std::uint64_t seed) {
  require(rel >= 0.0, "measurement noise must be nonnegative");
  SignalTrace out = trace;
  if (rel == 0.0 || trace.n_samples() < 2) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto m = static_cast<double>(trace.n_samples());
  for (int i = 0; i < out.n_channels(); ++i) {
    if (out.channels[i].kind == ChannelKind::kInput) continue;
    auto row = out.data.row(i);
    const double mean = row.mean();
    const double sd = std::sqrt((row.array() - mean).square().sum() / (m - 1.0));
    const double sigma = rel * sd;
    for (Eigen::Index j = 0; j < row.size(); ++j) row(j) += sigma * normal(rng);
  }
  return out;
}

}  // namespace dynresp
