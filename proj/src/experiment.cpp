#include "dynresp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dynresp/error.hpp"
#include "dynresp/io.hpp"
#include "text_util.hpp"

namespace dynresp {

namespace fs = std::filesystem;
using detail::format_double;
using detail::parse_double;
using detail::split_ws;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool parse_flag(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::kParse, key + ": expected true/false, got '" + std::string(v) + "'");
}

void set_ambient(ExperimentSpec& spec, const std::string& key, const std::string& v) {
  AmbientConfig& a = spec.ambient;
  const std::string ctx = "ambient." + key;
  if (key == "duration_s") {
    a.duration_s = parse_double(v, ctx);
  } else if (key == "sample_rate_hz") {
    a.sample_rate_hz = parse_double(v, ctx);
  } else if (key == "dt") {
    spec.dt = parse_double(v, ctx);
  } else if (key == "input_mode") {
    if (v == "generator_white") {
      a.input_mode = InputMode::kGeneratorWhite;
    } else if (v == "load_perturb") {
      a.input_mode = InputMode::kLoadPerturb;
    } else {
      fail(ErrorCode::kParse, ctx + ": expected generator_white or load_perturb");
    }
  } else if (key == "alpha") {
    a.alpha = parse_double(v, ctx);
  } else if (key == "measurement_noise_rel") {
    a.measurement_noise_rel = parse_double(v, ctx);
  } else if (key == "freq_filter_on") {
    a.freq_filter_on = parse_flag(v, ctx);
  } else if (key == "freq_filter_cutoff_hz") {
    a.freq_filter_cutoff_hz = parse_double(v, ctx);
  } else if (key == "freq_filter_order") {
    a.freq_filter_order = static_cast<int>(detail::parse_int(v, ctx));
  } else if (key == "modulation_period_s") {
    a.modulation_period_s = parse_double(v, ctx);
  } else if (key == "modulation_depth") {
    a.modulation_depth = parse_double(v, ctx);
  } else if (key == "outputs") {
    a.outputs.clear();
    for (auto tok : split_ws(v)) a.outputs.push_back(OutputSpec::parse(tok));
  } else {
    fail(ErrorCode::kParse, "unknown experiment key '" + ctx + "'");
  }
}

ResponseKind parse_response(std::string_view v) {
  if (v == "frequency") return ResponseKind::kFrequency;
  if (v == "angle") return ResponseKind::kAngle;
  fail(ErrorCode::kParse, "pair response must be frequency or angle, got '" + std::string(v) + "'");
}

int source_machine(const RecoveryPair& pair, int n) {
  const Channel src = Channel::parse(pair.source);
  const auto k = static_cast<int>(detail::parse_int(src.location, "source location")) - 1;
  require(k >= 0 && k < n, "source machine " + src.location + " out of range");
  return k;
}

std::optional<double> target_distance(const GridCase& c, const Channel& target) {
  if (target.kind == ChannelKind::kLineFlow || target.kind == ChannelKind::kInput) return std::nullopt;
  const auto bus = static_cast<std::size_t>(detail::parse_int(target.location, "target location")) - 1;
  if (bus >= c.distance_miles.size()) return std::nullopt;
  return c.distance_miles[bus];
}

ImpulseResponse negated(const ImpulseResponse& r, double sign) {
  ImpulseResponse out = r;
  for (double& v : out.values) v *= sign;
  return out;
}

std::string format_modes_csv(const ExperimentResult& res) {
  std::string out = "source,target,kind,data_freq_hz,model_freq_hz,data_logdec,model_logdec\n";
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    const auto& r = res.reports[i];
    const auto& m = res.model_modes[i];
    out += r.source + ',' + r.target + ',' + r.kind + ',' + format_double(r.est_osc_freq_hz) + ',' +
           format_double(m.osc_freq_hz) + ',' + format_double(r.est_damping) + ',' +
           format_double(m.damping) + '\n';
  }
  return out;
}

std::string format_nadir_csv(const ExperimentResult& res) {
  std::string out = "target,distance_miles,recovered_nadir_s,model_nadir_s,recovered_lag_s,interior\n";
  const double t0 = res.nadir_rows.empty() ? 0.0 : res.nadir_rows.front().recovered_nadir_s;
  for (const auto& row : res.nadir_rows) {
    out += row.target + ',' + format_double(row.distance_miles) + ',' +
           format_double(row.recovered_nadir_s) + ',' + format_double(row.model_nadir_s) + ',' +
           format_double(row.recovered_nadir_s - t0) + ',' + (row.interior ? "true" : "false") + '\n';
  }
  return out;
}

std::string format_summary(const ExperimentSpec& spec, const ExperimentResult& res) {
  std::string out = "experiment " + spec.name + " seed " + std::to_string(spec.seed) + "\n\n";
  out += format_report_table(res.reports);
  out += "\nmode estimates (data vs model)\n";
  char line[256];
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    const auto& r = res.reports[i];
    const auto& m = res.model_modes[i];
    std::snprintf(line, sizeof line, "  %s -> %-6s %-15s freq %.4f / %.4f Hz  logdec %.4f / %.4f\n",
                  r.source.c_str(), r.target.c_str(), r.kind.c_str(), r.est_osc_freq_hz, m.osc_freq_hz,
                  r.est_damping, m.damping);
    out += line;
  }
  if (!res.nadir_rows.empty()) {
    out += "\nnadir timing\n";
    for (const auto& row : res.nadir_rows) {
      std::snprintf(line, sizeof line, "  target %-6s %7.1f mi  recovered %.3f s  model %.3f s\n",
                    row.target.c_str(), row.distance_miles, row.recovered_nadir_s, row.model_nadir_s);
      out += line;
    }
    if (res.propagation_speed_mi_s) {
      std::snprintf(line, sizeof line, "  propagation speed %.0f mi/s\n", *res.propagation_speed_mi_s);
      out += line;
    }
  }
  return out;
}

}  // namespace

ExperimentSpec ExperimentSpec::parse(std::string_view text, const fs::path& base_dir,
                                     const std::string& origin) {
  ExperimentSpec spec;
  for (const auto& [key, value] : parse_key_values(text, origin)) {
    try {
      if (key == "name") {
        spec.name = value;
      } else if (key == "case") {
        spec.case_path = base_dir / value;
      } else if (key == "damping") {
        const auto toks = split_ws(value);
        require(toks.size() >= 2, "damping: expected 'uniform <g>' or 'ratios <g1> ...'",
                ErrorCode::kParse);
        if (toks[0] == "uniform") {
          spec.uniform_gamma = parse_double(toks[1], "damping");
          spec.damping_ratios.clear();
        } else if (toks[0] == "ratios") {
          spec.uniform_gamma.reset();
          spec.damping_ratios.clear();
          for (std::size_t i = 1; i < toks.size(); ++i) {
            spec.damping_ratios.push_back(parse_double(toks[i], "damping"));
          }
        } else {
          fail(ErrorCode::kParse, "damping: expected 'uniform' or 'ratios'");
        }
      } else if (key == "seed") {
        spec.seed = static_cast<std::uint64_t>(detail::parse_int(value, "seed"));
      } else if (key == "truth") {
        if (value == "modal") {
          spec.truth = TruthSource::kModal;
        } else if (value == "simulated") {
          spec.truth = TruthSource::kSimulated;
        } else {
          fail(ErrorCode::kParse, "truth: expected modal or simulated");
        }
      } else if (key.rfind("ambient.", 0) == 0) {
        set_ambient(spec, key.substr(8), value);
      } else if (key.rfind("recovery.", 0) == 0) {
        spec.recovery.set(key.substr(9), value);
      } else if (key == "pair") {
        const auto toks = split_ws(value);
        require(toks.size() == 3, "pair: expected '<source> <target> <frequency|angle>'",
                ErrorCode::kParse);
        spec.pairs.push_back({std::string(toks[0]), std::string(toks[1]), parse_response(toks[2])});
      } else if (key == "nadir.enabled") {
        spec.nadir_enabled = parse_flag(value, key);
      } else if (key == "nadir.sign") {
        spec.nadir_sign = parse_double(value, key) < 0.0 ? -1.0 : 1.0;
      } else if (key == "write_trace") {
        spec.write_trace = parse_flag(value, key);
      } else {
        fail(ErrorCode::kParse, "unknown experiment key '" + key + "'");
      }
    } catch (const Error& e) {
      fail(e.code(), origin + ": " + e.what());
    }
  }
  require(!spec.case_path.empty(), origin + ": missing 'case'", ErrorCode::kParse);
  require(std::filesystem::is_regular_file(spec.case_path),
          origin + ": case file " + spec.case_path.string() + " does not exist", ErrorCode::kIo);
  require(!spec.pairs.empty(), origin + ": no recovery pairs", ErrorCode::kParse);
  return spec;
}

ExperimentSpec ExperimentSpec::load(const fs::path& path) {
  ExperimentSpec spec = parse(detail::read_file(path), path.parent_path(), path.string());
  if (spec.name.empty()) spec.name = path.stem().string();
  return spec;
}

GridCase experiment_case(const ExperimentSpec& spec) {
  GridCase c = load_case(spec.case_path);
  if (spec.uniform_gamma) {
    set_uniform_damping(c, *spec.uniform_gamma);
  } else if (!spec.damping_ratios.empty()) {
    require(static_cast<int>(spec.damping_ratios.size()) == c.n_machines(),
            "damping ratios must list one value per machine");
    set_damping_ratios(c, Eigen::Map<const Eigen::VectorXd>(spec.damping_ratios.data(),
                                                            c.n_machines()));
  }
  return c;
}

ImpulseResponse truth_response(const GridCase& c, TruthSource truth, const RecoveryPair& pair,
                               std::span<const double> lags) {
  const int k = source_machine(pair, c.n_machines());
  const Channel tgt = Channel::parse(pair.target);
  const bool freq = pair.response == ResponseKind::kFrequency;
  require(lags.size() >= 2 && lags[0] == 0.0, "truth lags must start at 0 with uniform spacing");

  if (truth == TruthSource::kModal) {
    const auto gamma = c.uniform_damping_ratio();
    require(gamma.has_value(), "modal truth requires uniform damping D = gamma M");
    const ModalDecomposition md = decompose(c, *gamma, 1.0);
    switch (tgt.kind) {
      case ChannelKind::kRotorAngle:
      case ChannelKind::kRotorFreq: {
        const int l = static_cast<int>(detail::parse_int(tgt.location, "target")) - 1;
        return freq ? impulse_frequency(md, k, l, lags) : impulse_angle(md, k, l, lags);
      }
      case ChannelKind::kBusAngle:
      case ChannelKind::kBusFreq:
        return impulse_output(md, c, k, OutputSpec::parse("bus:" + tgt.location),
                              pair.response, lags);
      case ChannelKind::kLineFlow:
        return impulse_output(md, c, k, OutputSpec::parse("line:" + tgt.location),
                              pair.response, lags);
      case ChannelKind::kInput:
        break;
    }
    fail(ErrorCode::kInvalidArgument, "input channels have no impulse response");
  }

  Channel want = tgt;
  switch (tgt.kind) {
    case ChannelKind::kRotorAngle:
    case ChannelKind::kRotorFreq:
      want.kind = freq ? ChannelKind::kRotorFreq : ChannelKind::kRotorAngle;
      break;
    case ChannelKind::kBusAngle:
    case ChannelKind::kBusFreq:
      want.kind = freq ? ChannelKind::kBusFreq : ChannelKind::kBusAngle;
      break;
    case ChannelKind::kLineFlow:
      require(!freq, "simulated truth for line-flow rate is not supported");
      break;
    case ChannelKind::kInput:
      fail(ErrorCode::kInvalidArgument, "input channels have no impulse response");
  }
  ImpulseResponse r = simulated_impulse_response(c, k, want, lags[1] - lags[0], lags.size());
  r.kind = freq ? (want.kind == ChannelKind::kRotorFreq ? "frequency" : "bus_frequency")
                : (want.kind == ChannelKind::kRotorAngle ? "angle" : std::string(to_string(want.kind)));
  return r;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const fs::path& out_dir) {
  const GridCase c = experiment_case(spec);
  AmbientConfig amb = spec.ambient;
  amb.seed = spec.seed;
  const SignalTrace trace = simulate_ambient(c, amb, spec.dt);

  ExperimentResult res;
  std::optional<SignalTrace> filtered;
  std::optional<bool> filtered_with_ref;
  for (const RecoveryPair& pair : spec.pairs) {
    RecoveryConfig cfg = spec.recovery;
    cfg.source_channel = pair.source;
    cfg.target_channel = pair.target;
    cfg.response = pair.response;
    const bool ref = cfg.subtract_reference_angle.value_or(true);
    if (!filtered || filtered_with_ref != ref) {
      filtered = preprocess(trace, cfg.passband_low_hz, cfg.passband_high_hz, ref);
      filtered_with_ref = ref;
    }
    ImpulseResponse rec = recover_preprocessed(*filtered, cfg);
    ImpulseResponse truth = truth_response(c, spec.truth, pair, rec.lags_s);
    res.reports.push_back(make_report(rec, &truth));
    ModeEstimate mm{kNaN, kNaN, 0};
    try {
      mm = log_decrement(truth);
    } catch (const Error&) {
    }
    res.model_modes.push_back(mm);

    if (spec.nadir_enabled) {
      const Channel tgt = Channel::parse(pair.target);
      const Nadir nr = nadir(negated(rec, spec.nadir_sign));
      const Nadir nm = nadir(negated(truth, spec.nadir_sign));
      res.nadir_rows.push_back({tgt.location, target_distance(c, tgt).value_or(kNaN), nr.time_s,
                                nm.time_s, nr.interior});
    }
    res.recovered.push_back(std::move(rec));
    res.truth.push_back(std::move(truth));
  }

  if (spec.nadir_enabled) {
    std::vector<double> lags, dist;
    for (const auto& row : res.nadir_rows) {
      if (std::isnan(row.distance_miles)) continue;
      lags.push_back(row.recovered_nadir_s);
      dist.push_back(row.distance_miles);
    }
    try {
      if (lags.size() >= 2) res.propagation_speed_mi_s = propagation_speed(lags, dist);
    } catch (const Error&) {
    }
  }
  res.summary = format_summary(spec, res);

  detail::write_file_atomic(out_dir / "report.csv", format_report_csv(res.reports));
  detail::write_file_atomic(out_dir / "recovered.csv", format_response_csv(res.recovered));
  detail::write_file_atomic(out_dir / "truth.csv", format_response_csv(res.truth));
  detail::write_file_atomic(out_dir / "modes.csv", format_modes_csv(res));
  if (spec.nadir_enabled) detail::write_file_atomic(out_dir / "nadir_lag.csv", format_nadir_csv(res));
  if (spec.write_trace) write_trace(trace, out_dir / "trace.csv");
  detail::write_file_atomic(out_dir / "summary.txt", res.summary);
  return res;
}

ExperimentResult reproduce(std::string_view name, const fs::path& out_dir,
                           std::optional<std::uint64_t> seed, const fs::path& data_dir) {
  const fs::path path = data_dir / "experiments" / (std::string(name) + ".exp");
  if (!fs::exists(path)) {
    std::string known;
    for (const auto& n : bundled_experiments(data_dir)) known += (known.empty() ? "" : ", ") + n;
    fail(ErrorCode::kIo, "unknown experiment '" + std::string(name) + "' (no " + path.string() +
                             "); bundled: " + known);
  }
  ExperimentSpec spec = ExperimentSpec::load(path);
  if (seed) spec.seed = *seed;
  return run_experiment(spec, out_dir);
}

std::vector<std::string> bundled_experiments(const fs::path& data_dir) {
  std::vector<std::string> out;
  const fs::path dir = data_dir / "experiments";
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.path().extension() == ".exp") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dynresp
