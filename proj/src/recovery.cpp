#include "dynresp/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "dynresp/error.hpp"
#include "dynresp/evaluate.hpp"
#include "dynresp/filters.hpp"
#include "dynresp/io.hpp"
#include "text_util.hpp"

namespace dynresp {

using detail::format_double;
using detail::parse_double;
using detail::trim;

namespace {

bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::kParse, key + ": expected true/false, got '" + std::string(v) + "'");
}

ResponseKind parse_response_kind(std::string_view v) {
  if (v == "frequency" || v == "freq") return ResponseKind::kFrequency;
  if (v == "angle") return ResponseKind::kAngle;
  fail(ErrorCode::kParse, "response: expected frequency or angle, got '" + std::string(v) + "'");
}

XcorrMethod parse_method(std::string_view v) {
  if (v == "fft") return XcorrMethod::kFft;
  if (v == "direct") return XcorrMethod::kDirect;
  fail(ErrorCode::kParse, "method: expected fft or direct, got '" + std::string(v) + "'");
}

std::string_view quantity_tag(ChannelKind k) {
  switch (k) {
    case ChannelKind::kRotorAngle:
    case ChannelKind::kBusAngle:
      return "angle";
    case ChannelKind::kRotorFreq:
    case ChannelKind::kBusFreq:
      return "freq";
    case ChannelKind::kLineFlow:
      return "flow";
    case ChannelKind::kInput:
      break;
  }
  return "input";
}

std::string response_kind_name(ChannelKind target, ResponseKind response) {
  const bool freq = response == ResponseKind::kFrequency;
  switch (target) {
    case ChannelKind::kRotorAngle:
    case ChannelKind::kRotorFreq:
      return freq ? "frequency" : "angle";
    case ChannelKind::kBusAngle:
    case ChannelKind::kBusFreq:
      return freq ? "bus_frequency" : "bus_angle";
    case ChannelKind::kLineFlow:
      return freq ? "line_flow_rate" : "line_flow";
    case ChannelKind::kInput:
      break;
  }
  return "unknown";
}

bool is_location(std::string_view s) { return s.find(':') == std::string_view::npos; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Scaling parse_scaling(std::string_view s) {
  if (s == "theoretical") return Scaling::kTheoretical;
  if (s == "nadir_match") return Scaling::kNadirMatch;
  if (s == "none") return Scaling::kNone;
  fail(ErrorCode::kParse, "scaling: expected theoretical, nadir_match or none, got '" +
                              std::string(s) + "'");
}

std::string_view to_string(Scaling s) {
  switch (s) {
    case Scaling::kTheoretical:
      return "theoretical";
    case Scaling::kNadirMatch:
      return "nadir_match";
    case Scaling::kNone:
      return "none";
  }
  return "none";
}

void RecoveryConfig::set(std::string_view key, std::string_view value) {
  const std::string k(key);
  value = trim(value);
  if (k == "source") {
    source_channel = std::string(value);
  } else if (k == "target") {
    target_channel = std::string(value);
  } else if (k == "passband") {
    std::string v(value);
    std::replace(v.begin(), v.end(), ',', ' ');
    const auto parts = detail::split_ws(v);
    if (parts.size() != 2) fail(ErrorCode::kParse, "passband: expected 'low,high'");
    passband_low_hz = parse_double(parts[0], "passband low");
    passband_high_hz = parse_double(parts[1], "passband high");
  } else if (k == "passband_low_hz") {
    passband_low_hz = parse_double(value, k);
  } else if (k == "passband_high_hz") {
    passband_high_hz = parse_double(value, k);
  } else if (k == "response") {
    response = parse_response_kind(value);
  } else if (k == "differentiation_order") {
    differentiation_order = static_cast<int>(detail::parse_int(value, k));
  } else if (k == "scaling") {
    scaling = parse_scaling(value);
  } else if (k == "gamma") {
    gamma = parse_double(value, k);
  } else if (k == "alpha") {
    alpha = parse_double(value, k);
  } else if (k == "nadir_reference") {
    nadir_reference = parse_double(value, k);
  } else if (k == "max_lag_s") {
    max_lag_s = parse_double(value, k);
  } else if (k == "subtract_reference_angle") {
    subtract_reference_angle = parse_bool(value, k);
  } else if (k == "method") {
    method = parse_method(value);
  } else {
    fail(ErrorCode::kParse, "unknown recovery key '" + k + "'");
  }
}

RecoveryConfig RecoveryConfig::parse(std::string_view text, const std::string& origin) {
  RecoveryConfig cfg;
  for (const auto& [k, v] : parse_key_values(text, origin)) {
    try {
      cfg.set(k, v);
    } catch (const Error& e) {
      fail(e.code(), origin + ": " + e.what());
    }
  }
  return cfg;
}

std::string RecoveryConfig::format() const {
  std::string out;
  out += "source=" + source_channel + "\n";
  out += "target=" + target_channel + "\n";
  out += "passband=" + format_double(passband_low_hz) + "," + format_double(passband_high_hz) + "\n";
  if (response) {
    out += std::string("response=") +
           (*response == ResponseKind::kFrequency ? "frequency" : "angle") + "\n";
  }
  if (differentiation_order) {
    out += "differentiation_order=" + std::to_string(*differentiation_order) + "\n";
  }
  out += "scaling=" + std::string(to_string(scaling)) + "\n";
  out += "gamma=" + format_double(gamma) + "\n";
  out += "alpha=" + format_double(alpha) + "\n";
  if (scaling == Scaling::kNadirMatch) out += "nadir_reference=" + format_double(nadir_reference) + "\n";
  if (max_lag_s) out += "max_lag_s=" + format_double(*max_lag_s) + "\n";
  if (subtract_reference_angle) {
    out += std::string("subtract_reference_angle=") + (*subtract_reference_angle ? "true" : "false") +
           "\n";
  }
  out += std::string("method=") + (method == XcorrMethod::kFft ? "fft" : "direct") + "\n";
  return out;
}

Relation relation_for(ChannelKind source, ChannelKind target, ResponseKind response) {
  auto usable = [](ChannelKind k) {
    return is_angle_kind(k) || is_freq_kind(k) || k == ChannelKind::kLineFlow;
  };
  require(is_angle_kind(source) || is_freq_kind(source),
          "source channel must be an angle or frequency channel, got " + std::string(to_string(source)));
  require(usable(target), "target channel must be an angle, frequency or line-flow channel");
  const int order = 1 + (response == ResponseKind::kFrequency ? 1 : 0) -
                    (is_freq_kind(source) ? 1 : 0) - (is_freq_kind(target) ? 1 : 0);
  if (order < 0) {
    fail(ErrorCode::kInvalidArgument,
         "an angle response cannot be recovered from frequency-frequency correlations "
         "(it would require integration)");
  }
  Relation r;
  r.differentiation_order = order;
  r.sign = is_freq_kind(target) ? 1.0 : -1.0;
  r.tag = std::string(quantity_tag(source)) + "-" + std::string(quantity_tag(target)) + "/order" +
          std::to_string(order);
  return r;
}

ChannelPair select_channels(const SignalTrace& trace, std::string_view source,
                            std::string_view target) {
  require(!source.empty(), "source channel not specified");
  require(!target.empty(), "target channel not specified");
  ChannelPair out;

  Channel tgt;
  if (is_location(target)) {
    tgt = target.find('-') != std::string_view::npos
              ? Channel{ChannelKind::kLineFlow, std::string(target)}
              : Channel{ChannelKind::kBusAngle, std::string(target)};
  } else {
    tgt = Channel::parse(target);
  }
  if (auto i = trace.find(tgt.name())) {
    out.target = *i;
  } else if (tgt.kind == ChannelKind::kBusAngle || tgt.kind == ChannelKind::kBusFreq) {
    const Channel rotor{tgt.kind == ChannelKind::kBusAngle ? ChannelKind::kRotorAngle
                                                           : ChannelKind::kRotorFreq,
                        tgt.location};
    if (is_location(target) && trace.find(rotor.name())) {
      out.target = *trace.find(rotor.name());
    } else {
      out.target = trace.index_of(tgt.name());
    }
  } else {
    out.target = trace.index_of(tgt.name());
  }

  if (!is_location(source)) {
    out.source = trace.index_of(source);
    return out;
  }
  const ChannelKind tk = trace.channels[out.target].kind;
  std::vector<ChannelKind> prefs;
  if (tk == ChannelKind::kLineFlow || tk == ChannelKind::kBusAngle || tk == ChannelKind::kRotorAngle) {
    prefs = {tk == ChannelKind::kRotorAngle ? ChannelKind::kRotorAngle : ChannelKind::kBusAngle,
             ChannelKind::kRotorAngle};
  } else {
    prefs = {tk == ChannelKind::kRotorFreq ? ChannelKind::kRotorFreq : ChannelKind::kBusFreq,
             ChannelKind::kRotorFreq};
  }
  for (ChannelKind k : prefs) {
    if (auto i = trace.find(Channel{k, std::string(source)}.name())) {
      out.source = *i;
      return out;
    }
  }
  out.source = trace.index_of(Channel{prefs.front(), std::string(source)}.name());
  return out;
}

SignalTrace preprocess(const SignalTrace& trace, double low_hz, double high_hz,
                       bool subtract_reference_angle) {
  trace.validate();
  const double fs = trace.sample_rate_hz;
  require(low_hz > 0.0 && low_hz < high_hz && high_hz < 0.5 * fs,
          "passband (" + format_double(low_hz) + ", " + format_double(high_hz) +
              ") Hz must satisfy 0 < low < high < Nyquist=" + format_double(0.5 * fs) + " Hz");
  const double duration = static_cast<double>(trace.n_samples()) / fs;
  const double min_duration = 10.0 / (2.0 * std::acos(-1.0) * low_hz);
  require(duration >= min_duration, "trace of " + format_double(duration) +
                                        " s is shorter than 10 filter time constants (" +
                                        format_double(min_duration) + " s)");

  SignalTrace out = trace;
  if (subtract_reference_angle) {
    std::vector<int> bus, rotor;
    for (int i = 0; i < out.n_channels(); ++i) {
      if (out.channels[i].kind == ChannelKind::kBusAngle) bus.push_back(i);
      if (out.channels[i].kind == ChannelKind::kRotorAngle) rotor.push_back(i);
    }
    const std::vector<int>& ref_rows = bus.empty() ? rotor : bus;
    if (!ref_rows.empty()) {
      Eigen::RowVectorXd ref = Eigen::RowVectorXd::Zero(out.n_samples());
      for (int i : ref_rows) ref += trace.data.row(i);
      ref /= static_cast<double>(ref_rows.size());
      for (int i = 0; i < out.n_channels(); ++i) {
        if (is_angle_kind(out.channels[i].kind)) out.data.row(i) -= ref;
      }
    }
  }

  std::vector<double> buf(static_cast<std::size_t>(out.n_samples()));
  for (int i = 0; i < out.n_channels(); ++i) {
    if (out.channels[i].kind == ChannelKind::kInput) continue;
    for (Eigen::Index j = 0; j < out.n_samples(); ++j) buf[j] = out.data(i, j);
    std::vector<double> y = bandpass_zero_phase(buf, low_hz, high_hz, fs);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    for (Eigen::Index j = 0; j < out.n_samples(); ++j) out.data(i, j) = y[j] - mean;
  }
  out.metadata["passband_hz"] = format_double(low_hz) + "," + format_double(high_hz);
  out.metadata["reference_angle_subtracted"] = subtract_reference_angle ? "true" : "false";
  return out;
}

namespace {

bool default_reference_subtraction(const SignalTrace& trace, const RecoveryConfig& cfg) {
  if (cfg.subtract_reference_angle) return *cfg.subtract_reference_angle;
  const ChannelPair p = select_channels(trace, cfg.source_channel, cfg.target_channel);
  return is_angle_kind(trace.channels[p.source].kind) ||
         is_angle_kind(trace.channels[p.target].kind) ||
         trace.channels[p.target].kind == ChannelKind::kLineFlow;
}

}  // namespace

SignalTrace preprocess(const SignalTrace& trace, const RecoveryConfig& cfg) {
  return preprocess(trace, cfg.passband_low_hz, cfg.passband_high_hz,
                    default_reference_subtraction(trace, cfg));
}

std::vector<double> cross_correlate(std::span<const double> x, std::span<const double> y,
                                    std::size_t max_lag, XcorrMethod method) {
  require(x.size() == y.size(), "cross-correlation inputs differ in length (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  const std::size_t m = x.size();
  require(max_lag < m, "max lag " + std::to_string(max_lag) + " must be below the record length " +
                           std::to_string(m));
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<double> out(max_lag + 1);

  if (method == XcorrMethod::kDirect) {
    for (std::size_t tau = 0; tau <= max_lag; ++tau) {
      double acc = 0.0;
      for (std::size_t i = tau; i < m; ++i) acc += x[i] * y[i - tau];
      out[tau] = acc * inv_m;
    }
    return out;
  }

  const std::size_t nfft = next_pow2(m + max_lag + 1);
  std::vector<double> xp(nfft, 0.0), yp(nfft, 0.0);
  std::copy(x.begin(), x.end(), xp.begin());
  std::copy(y.begin(), y.end(), yp.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> X, Y;
  fft.fwd(X, xp);
  fft.fwd(Y, yp);
  for (std::size_t i = 0; i < X.size(); ++i) X[i] *= std::conj(Y[i]);
  std::vector<double> c;
  fft.inv(c, X);
  for (std::size_t tau = 0; tau <= max_lag; ++tau) out[tau] = c[tau] * inv_m;
  return out;
}

std::vector<double> differentiate(std::span<const double> curve, int order, double step) {
  require(order >= 0 && order <= 2, "differentiation order must be 0, 1 or 2");
  require(step > 0.0, "differentiation step must be positive");
  if (order == 0) return {curve.begin(), curve.end()};
  const std::size_t n = curve.size();
  require(n >= static_cast<std::size_t>(2 * order + 1),
          "curve too short for order-" + std::to_string(order) + " differentiation (" +
              std::to_string(n) + " samples)");
  std::vector<double> d(n);
  const double inv2h = 0.5 / step;
  d[0] = (-3.0 * curve[0] + 4.0 * curve[1] - curve[2]) * inv2h;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (curve[i + 1] - curve[i - 1]) * inv2h;
  d[n - 1] = (3.0 * curve[n - 1] - 4.0 * curve[n - 2] + curve[n - 3]) * inv2h;
  if (order == 1) return d;
  return differentiate(d, 1, step);
}

ImpulseResponse recover_preprocessed(const SignalTrace& filtered, const RecoveryConfig& cfg) {
  require(cfg.passband_low_hz > 0.0 && cfg.passband_low_hz < cfg.passband_high_hz,
          "passband must satisfy 0 < low < high");
  const ChannelPair p = select_channels(filtered, cfg.source_channel, cfg.target_channel);
  const ChannelKind sk = filtered.channels[p.source].kind;
  const ChannelKind tk = filtered.channels[p.target].kind;
  const ResponseKind response =
      cfg.response.value_or(is_freq_kind(tk) ? ResponseKind::kFrequency : ResponseKind::kAngle);
  const Relation rel = relation_for(sk, tk, response);
  if (cfg.differentiation_order && *cfg.differentiation_order != rel.differentiation_order) {
    fail(ErrorCode::kInvalidArgument,
         "differentiation_order=" + std::to_string(*cfg.differentiation_order) + " does not match the " +
             rel.tag + " relation");
  }

  const double fs = filtered.sample_rate_hz;
  const double ts = 1.0 / fs;
  const auto m = static_cast<std::size_t>(filtered.n_samples());
  std::size_t max_lag = 0;
  if (cfg.max_lag_s) {
    require(*cfg.max_lag_s > 0.0, "max_lag_s must be positive");
    max_lag = static_cast<std::size_t>(std::llround(*cfg.max_lag_s * fs));
  } else {
    max_lag = std::min(static_cast<std::size_t>(std::llround(20.0 * fs)), m / 4);
  }
  require(max_lag >= 1, "max lag must cover at least one sample");

  const Eigen::RowVectorXd xs = filtered.data.row(p.source);
  const Eigen::RowVectorXd ys = filtered.data.row(p.target);
  std::vector<double> c = cross_correlate(std::span<const double>(xs.data(), m),
                                          std::span<const double>(ys.data(), m), max_lag, cfg.method);
  c = differentiate(c, rel.differentiation_order, ts);

  ImpulseResponse r;
  r.lags_s = uniform_lags(ts, c.size());
  r.values = std::move(c);
  r.source = filtered.channels[p.source].location;
  r.target = filtered.channels[p.target].location;
  r.kind = response_kind_name(tk, response);
  r.relation = rel.tag;

  double scale = 1.0;
  switch (cfg.scaling) {
    case Scaling::kTheoretical:
      require(cfg.gamma > 0.0 && cfg.alpha > 0.0, "theoretical scaling needs gamma, alpha > 0");
      scale = rel.sign * 2.0 * cfg.gamma / cfg.alpha;
      break;
    case Scaling::kNadirMatch: {
      const Nadir raw = nadir(r);
      if (raw.value == 0.0) fail(ErrorCode::kNumeric, "cannot nadir-match a curve whose nadir is zero");
      scale = cfg.nadir_reference / raw.value;
      break;
    }
    case Scaling::kNone:
      break;
  }
  for (double& v : r.values) v *= scale;
  r.scale_applied = scale;
  return r;
}

ImpulseResponse recover(const SignalTrace& trace, const RecoveryConfig& cfg) {
  const ChannelPair p = select_channels(trace, cfg.source_channel, cfg.target_channel);
  RecoveryConfig resolved = cfg;
  resolved.source_channel = trace.channels[p.source].name();
  resolved.target_channel = trace.channels[p.target].name();
  const SignalTrace filtered = preprocess(trace, resolved);
  return recover_preprocessed(filtered, resolved);
}

}  // namespace dynresp
