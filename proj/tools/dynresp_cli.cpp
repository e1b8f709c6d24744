#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynresp/dynresp.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  dynresp_status status;
};

void check(dynresp_status s, const std::string& stage) {
  if (s == DYNRESP_OK) return;
  std::fprintf(stderr, "dynresp: %s: %s\n", stage.c_str(), dynresp_last_error());
  throw Failure{s};
}

struct CaseDeleter {
  void operator()(dynresp_case* c) const { dynresp_case_free(c); }
};
struct TraceDeleter {
  void operator()(dynresp_trace* t) const { dynresp_trace_free(t); }
};
struct ResponsesDeleter {
  void operator()(dynresp_responses* r) const { dynresp_responses_free(r); }
};
struct StringDeleter {
  void operator()(char* s) const { dynresp_string_free(s); }
};
using CasePtr = std::unique_ptr<dynresp_case, CaseDeleter>;
using TracePtr = std::unique_ptr<dynresp_trace, TraceDeleter>;
using ResponsesPtr = std::unique_ptr<dynresp_responses, ResponsesDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

struct Common {
  std::optional<uint64_t> seed;
  std::string out_dir = "out";
  std::string format = "csv";
  std::string data_dir;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Random seed");
  cmd->add_option("--out-dir", common.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--format", common.format, "Output format")
      ->check(CLI::IsMember({"csv"}))
      ->capture_default_str();
  cmd->add_option("--data-dir", common.data_dir, "Directory with bundled cases and experiments");
}

std::string data_dir(const Common& common) {
  return common.data_dir.empty() ? dynresp_default_data_dir() : common.data_dir;
}

// Bare names of bundled cases resolve against <data-dir>/cases.
std::string resolve_case(const std::string& path, const Common& common) {
  if (fs::exists(path)) return path;
  const fs::path bundled = fs::path(data_dir(common)) / "cases" / path;
  if (fs::exists(bundled)) return bundled.string();
  return path;
}

CasePtr load_case(const std::string& path) {
  dynresp_case* c = nullptr;
  check(dynresp_case_load(path.c_str(), &c), "load case");
  return CasePtr(c);
}

void print_and_free(char* s) {
  StringPtr owned(s);
  if (owned) std::fputs(owned.get(), stdout);
}

struct CaseGenArgs {
  int n = 3;
  std::string topology = "chain";
  std::optional<double> gamma;
  std::string out = "synthetic.case";
};

void run_case_gen(const CaseGenArgs& a, const Common& common) {
  dynresp_case* raw = nullptr;
  check(dynresp_case_synthetic(a.n, a.topology.c_str(), common.seed.value_or(0), &raw), "case gen");
  CasePtr c(raw);
  if (a.gamma) check(dynresp_case_set_uniform_damping(c.get(), *a.gamma), "case gen");
  const fs::path out = fs::path(a.out).is_absolute() || a.out.find('/') != std::string::npos
                           ? fs::path(a.out)
                           : fs::path(common.out_dir) / a.out;
  check(dynresp_case_write(c.get(), out.string().c_str()), "write case");
  std::printf("wrote %s (%d machines)\n", out.string().c_str(), dynresp_case_n_machines(c.get()));
}

struct SimulateArgs {
  std::string case_path;
  bool ambient = false;
  bool impulse = false;
  double duration = 600.0;
  double rate = 100.0;
  std::optional<double> dt;
  double alpha = 1.0;
  std::string input_mode = "generator_white";
  double noise = 2e-5;
  bool freq_filter = false;
  double filter_cutoff = 1.5;
  int filter_order = 2;
  double modulation_period = 0.0;
  double modulation_depth = 0.5;
  std::string outputs;
  std::optional<double> gamma;
  int source = 1;
  double horizon = 20.0;
  std::string out = "trace.csv";
};

void run_simulate(const SimulateArgs& a, const Common& common) {
  if (a.ambient == a.impulse) {
    std::fprintf(stderr, "dynresp: simulate: choose exactly one of --ambient or --impulse\n");
    throw Failure{DYNRESP_E_INVALID_ARGUMENT};
  }
  CasePtr c = load_case(resolve_case(a.case_path, common));
  if (a.gamma) check(dynresp_case_set_uniform_damping(c.get(), *a.gamma), "simulate");
  dynresp_trace* raw = nullptr;
  if (a.ambient) {
    dynresp_ambient_config cfg;
    dynresp_ambient_config_init(&cfg);
    cfg.duration_s = a.duration;
    cfg.sample_rate_hz = a.rate;
    cfg.dt = a.dt.value_or(1.0 / a.rate);
    cfg.alpha = a.alpha;
    cfg.seed = common.seed.value_or(0);
    cfg.input_mode = a.input_mode == "load_perturb" ? DYNRESP_LOAD_PERTURB : DYNRESP_GENERATOR_WHITE;
    cfg.measurement_noise_rel = a.noise;
    cfg.freq_filter_on = a.freq_filter ? 1 : 0;
    cfg.freq_filter_cutoff_hz = a.filter_cutoff;
    cfg.freq_filter_order = a.filter_order;
    cfg.modulation_period_s = a.modulation_period;
    cfg.modulation_depth = a.modulation_depth;
    cfg.outputs = a.outputs.empty() ? nullptr : a.outputs.c_str();
    check(dynresp_simulate_ambient(c.get(), &cfg, &raw), "simulate");
  } else {
    check(dynresp_simulate_impulse(c.get(), a.source, a.dt.value_or(1e-3), a.horizon, &raw), "simulate");
  }
  TracePtr t(raw);
  if (a.impulse && !a.outputs.empty()) {
    check(dynresp_trace_map_outputs(t.get(), c.get(), a.outputs.c_str()), "map outputs");
  }
  const fs::path out = fs::path(common.out_dir) / a.out;
  check(dynresp_trace_write(t.get(), out.string().c_str()), "write trace");
  std::printf("wrote %s (%d channels x %zu samples at %g Hz)\n", out.string().c_str(),
              dynresp_trace_n_channels(t.get()), dynresp_trace_n_samples(t.get()),
              dynresp_trace_sample_rate(t.get()));
}

struct RecoverArgs {
  std::string trace;
  std::string config;
  std::string source;
  std::vector<std::string> targets;
  std::string response;
  std::string passband;
  std::string scaling;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::optional<double> nadir_reference;
  std::optional<double> max_lag;
  std::string method;
  std::string ref_angle;
  std::string case_path;
  std::string truth = "auto";
};

std::string read_text(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) {
    std::fprintf(stderr, "dynresp: cannot open '%s'\n", path.c_str());
    throw Failure{DYNRESP_E_IO};
  }
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

void run_recover(const RecoverArgs& a, const Common& common) {
  dynresp_trace* raw = nullptr;
  check(dynresp_trace_read(a.trace.c_str(), &raw), "read trace");
  TracePtr t(raw);

  std::string base = a.config.empty() ? std::string() : read_text(a.config) + "\n";
  auto put = [&base](const std::string& k, const std::string& v) { base += k + "=" + v + "\n"; };
  if (!a.source.empty()) put("source", a.source);
  if (!a.response.empty()) put("response", a.response);
  if (!a.passband.empty()) put("passband", a.passband);
  if (!a.scaling.empty()) put("scaling", a.scaling);
  if (a.gamma) put("gamma", std::to_string(*a.gamma));
  if (a.alpha) put("alpha", std::to_string(*a.alpha));
  if (a.nadir_reference) put("nadir_reference", std::to_string(*a.nadir_reference));
  if (a.max_lag) put("max_lag_s", std::to_string(*a.max_lag));
  if (!a.method.empty()) put("method", a.method);
  if (!a.ref_angle.empty()) put("subtract_reference_angle", a.ref_angle);

  ResponsesPtr recovered(dynresp_responses_create());
  std::vector<std::string> targets = a.targets;
  if (targets.empty()) targets.emplace_back();
  for (const auto& target : targets) {
    std::string cfg = base;
    if (!target.empty()) cfg += "target=" + target + "\n";
    check(dynresp_recover(t.get(), cfg.c_str(), recovered.get()),
          "recover" + (target.empty() ? std::string() : " " + target));
  }

  const fs::path dir(common.out_dir);
  check(dynresp_responses_write(recovered.get(), (dir / "recovered.csv").string().c_str()),
        "write responses");

  ResponsesPtr truth;
  if (!a.case_path.empty()) {
    CasePtr c = load_case(resolve_case(a.case_path, common));
    const int mode = a.truth == "modal"       ? DYNRESP_TRUTH_MODAL
                     : a.truth == "simulated" ? DYNRESP_TRUTH_SIMULATED
                                              : DYNRESP_TRUTH_AUTO;
    truth.reset(dynresp_responses_create());
    for (size_t i = 0; i < dynresp_responses_count(recovered.get()); ++i) {
      const std::string kind = dynresp_response_field(recovered.get(), i, "kind");
      const bool freq = kind == "frequency" || kind == "bus_frequency" || kind == "line_flow_rate";
      const std::string relation = dynresp_response_field(recovered.get(), i, "relation");
      const std::string tgt_q = relation.substr(relation.find('-') + 1,
                                                relation.find('/') - relation.find('-') - 1);
      const std::string target = dynresp_response_field(recovered.get(), i, "target");
      std::string target_channel;
      if (tgt_q == "flow") {
        target_channel = "line_flow:" + target;
      } else if (kind.rfind("bus_", 0) == 0) {
        target_channel = "bus_angle:" + target;
      } else {
        target_channel = "rotor_angle:" + target;
      }
      const std::string source_channel =
          std::string("rotor_angle:") + dynresp_response_field(recovered.get(), i, "source");
      const size_t n = dynresp_response_size(recovered.get(), i);
      std::vector<double> lags(n);
      check(dynresp_response_lags(recovered.get(), i, lags.data(), n), "truth");
      check(dynresp_model_response(c.get(), mode, source_channel.c_str(), target_channel.c_str(),
                                   freq ? "frequency" : "angle", lags[1] - lags[0], n, truth.get()),
            "truth " + target_channel);
    }
    check(dynresp_responses_write(truth.get(), (dir / "truth.csv").string().c_str()), "write truth");
  }

  char* table = nullptr;
  check(dynresp_evaluate_all(recovered.get(), truth.get(), (dir / "report.csv").string().c_str(), &table),
        "evaluate");
  print_and_free(table);
  for (size_t i = 0; i < dynresp_responses_count(recovered.get()); ++i) {
    std::printf("relation %s -> %s: %s\n", dynresp_response_field(recovered.get(), i, "source"),
                dynresp_response_field(recovered.get(), i, "target"),
                dynresp_response_field(recovered.get(), i, "relation"));
  }
}

struct EvaluateArgs {
  std::string recovered;
  std::string truth;
};

void run_evaluate(const EvaluateArgs& a, const Common& common) {
  ResponsesPtr est(dynresp_responses_create());
  check(dynresp_responses_read(a.recovered.c_str(), est.get()), "read responses");
  ResponsesPtr truth;
  if (!a.truth.empty()) {
    truth.reset(dynresp_responses_create());
    check(dynresp_responses_read(a.truth.c_str(), truth.get()), "read truth");
  }
  char* table = nullptr;
  const fs::path report = fs::path(common.out_dir) / "report.csv";
  check(dynresp_evaluate_all(est.get(), truth.get(), report.string().c_str(), &table), "evaluate");
  print_and_free(table);
}

struct ReproduceArgs {
  std::string name;
  bool list = false;
};

void run_reproduce(const ReproduceArgs& a, const Common& common) {
  const std::string dir = data_dir(common);
  if (a.list || a.name.empty()) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(fs::path(dir) / "experiments")) {
      if (e.path().extension() == ".exp") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) std::printf("%s\n", n.c_str());
    return;
  }
  const fs::path out = fs::path(common.out_dir) / a.name;
  char* summary = nullptr;
  if (fs::exists(a.name) && fs::is_regular_file(a.name)) {
    check(dynresp_run_experiment(a.name.c_str(), (fs::path(common.out_dir)).string().c_str(),
                                 common.seed.has_value(), common.seed.value_or(0), &summary),
          "reproduce");
  } else {
    check(dynresp_reproduce(a.name.c_str(), out.string().c_str(), common.seed.has_value(),
                            common.seed.value_or(0), dir.c_str(), &summary),
          "reproduce " + a.name);
  }
  print_and_free(summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-response recovery from ambient synchrophasor data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dynresp_version()));

  Common common;

  auto* case_cmd = app.add_subcommand("case", "Case utilities");
  case_cmd->require_subcommand(1);
  CaseGenArgs gen;
  auto* gen_cmd = case_cmd->add_subcommand("gen", "Generate a synthetic Laplacian case");
  gen_cmd->add_option("--n", gen.n, "Number of machines")->capture_default_str();
  gen_cmd->add_option("--topology", gen.topology, "chain, ring or complete")
      ->check(CLI::IsMember({"chain", "ring", "complete"}))
      ->capture_default_str();
  gen_cmd->add_option("--gamma", gen.gamma, "Uniform damping ratio override");
  gen_cmd->add_option("--out", gen.out, "Output case file")->capture_default_str();
  add_common(gen_cmd, common);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate ambient or impulse responses");
  sim_cmd->add_option("--case", sim.case_path, "Case file")->required();
  sim_cmd->add_flag("--ambient", sim.ambient, "White-noise driven ambient data");
  sim_cmd->add_flag("--impulse", sim.impulse, "Unit-area pulse response");
  sim_cmd->add_option("--duration", sim.duration, "Ambient duration in seconds")->capture_default_str();
  sim_cmd->add_option("--rate", sim.rate, "Output sample rate in Hz")->capture_default_str();
  sim_cmd->add_option("--dt", sim.dt, "Integration step (default 1/rate, or 1e-3 for --impulse)");
  sim_cmd->add_option("--alpha", sim.alpha, "Ambient noise scale")->capture_default_str();
  sim_cmd->add_option("--input-mode", sim.input_mode, "generator_white or load_perturb")
      ->check(CLI::IsMember({"generator_white", "load_perturb"}))
      ->capture_default_str();
  sim_cmd->add_option("--noise", sim.noise, "Relative measurement noise")->capture_default_str();
  sim_cmd->add_flag("--freq-filter", sim.freq_filter, "Apply the surrogate PMU frequency filter");
  sim_cmd->add_option("--filter-cutoff", sim.filter_cutoff, "Filter cutoff in Hz")->capture_default_str();
  sim_cmd->add_option("--filter-order", sim.filter_order, "Filter order")->capture_default_str();
  sim_cmd->add_option("--modulation-period", sim.modulation_period, "Input modulation period (s)");
  sim_cmd->add_option("--modulation-depth", sim.modulation_depth, "Input modulation depth");
  sim_cmd->add_option("--outputs", sim.outputs, "Output specs, e.g. \"bus:7 line:7-8\"");
  sim_cmd->add_option("--gamma", sim.gamma, "Uniform damping ratio override");
  sim_cmd->add_option("--source", sim.source, "Impulse machine (one-based)")->capture_default_str();
  sim_cmd->add_option("--horizon", sim.horizon, "Impulse horizon in seconds")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Trace file name")->capture_default_str();
  add_common(sim_cmd, common);

  RecoverArgs rec;
  auto* rec_cmd = app.add_subcommand("recover", "Recover dynamic responses from an ambient trace");
  rec_cmd->add_option("--trace", rec.trace, "Trace CSV")->required();
  rec_cmd->add_option("--config", rec.config, "Recovery config (key=value)");
  rec_cmd->add_option("--source", rec.source, "Source channel or machine id");
  rec_cmd->add_option("--target", rec.targets, "Target channel(s)");
  rec_cmd->add_option("--response", rec.response, "frequency or angle")
      ->check(CLI::IsMember({"frequency", "angle"}));
  rec_cmd->add_option("--passband", rec.passband, "low,high in Hz");
  rec_cmd->add_option("--scaling", rec.scaling, "theoretical, nadir_match or none")
      ->check(CLI::IsMember({"theoretical", "nadir_match", "none"}));
  rec_cmd->add_option("--gamma", rec.gamma, "Damping ratio for theoretical scaling");
  rec_cmd->add_option("--alpha", rec.alpha, "Noise scale for theoretical scaling");
  rec_cmd->add_option("--nadir-reference", rec.nadir_reference, "Reference nadir for nadir_match");
  rec_cmd->add_option("--max-lag", rec.max_lag, "Maximum lag in seconds");
  rec_cmd->add_option("--method", rec.method, "fft or direct")->check(CLI::IsMember({"fft", "direct"}));
  rec_cmd->add_option("--ref-angle", rec.ref_angle, "Subtract the reference angle (true/false)");
  rec_cmd->add_option("--case", rec.case_path, "Case file for model-based truth curves");
  rec_cmd->add_option("--truth", rec.truth, "auto, modal or simulated")
      ->check(CLI::IsMember({"auto", "modal", "simulated"}))
      ->capture_default_str();
  add_common(rec_cmd, common);

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score recovered responses");
  ev_cmd->add_option("--recovered", ev.recovered, "Recovered response CSV")->required();
  ev_cmd->add_option("--truth", ev.truth, "Truth response CSV (same curve order)");
  add_common(ev_cmd, common);

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run a bundled experiment");
  rep_cmd->add_option("name", rep.name, "wscc9-uniform, wscc9-nonuniform-load, nadir-lag or a spec file");
  rep_cmd->add_flag("--list", rep.list, "List bundled experiments");
  add_common(rep_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen_cmd->parsed()) run_case_gen(gen, common);
    if (sim_cmd->parsed()) run_simulate(sim, common);
    if (rec_cmd->parsed()) run_recover(rec, common);
    if (ev_cmd->parsed()) run_evaluate(ev, common);
    if (rep_cmd->parsed()) run_reproduce(rep, common);
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dynresp: %s\n", e.what());
    return DYNRESP_E_INTERNAL;
  }
  return 0;
}
