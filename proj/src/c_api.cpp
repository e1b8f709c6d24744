#include "dynresp/dynresp.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "dynresp/error.hpp"
#include "dynresp/evaluate.hpp"
#include "dynresp/experiment.hpp"
#include "dynresp/grid_model.hpp"
#include "dynresp/io.hpp"
#include "dynresp/recovery.hpp"
#include "dynresp/simulate.hpp"
#include "text_util.hpp"

#ifndef DYNRESP_DEFAULT_DATA_DIR
#define DYNRESP_DEFAULT_DATA_DIR "data"
#endif

struct dynresp_case {
  dynresp::GridCase value;
};

struct dynresp_trace {
  dynresp::SignalTrace value;
  std::vector<std::string> names;

  void refresh() { names = value.channel_names(); }
};

struct dynresp_responses {
  std::vector<dynresp::ImpulseResponse> items;
};

namespace {

thread_local std::string g_last_error;

dynresp_status set_error(dynresp_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <class Fn>
dynresp_status guard(Fn&& fn) {
  try {
    fn();
    return DYNRESP_OK;
  } catch (const dynresp::Error& e) {
    return set_error(static_cast<dynresp_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(DYNRESP_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(DYNRESP_E_INTERNAL, e.what());
  } catch (...) {
    return set_error(DYNRESP_E_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) dynresp::fail(dynresp::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<dynresp::OutputSpec> parse_outputs(const char* text) {
  std::vector<dynresp::OutputSpec> out;
  if (text == nullptr) return out;
  for (auto tok : dynresp::detail::split_ws(text)) out.push_back(dynresp::OutputSpec::parse(tok));
  return out;
}

const dynresp::ImpulseResponse& response_at(const dynresp_responses* r, size_t i) {
  need(r, "responses");
  dynresp::require(i < r->items.size(), "response index " + std::to_string(i) + " out of range");
  return r->items[i];
}

}  // namespace

extern "C" {

const char* dynresp_version(void) { return "0.1.0"; }

const char* dynresp_last_error(void) { return g_last_error.c_str(); }

void dynresp_string_free(char* s) { std::free(s); }

const char* dynresp_default_data_dir(void) {
  const char* env = std::getenv("DYNRESP_DATA_DIR");
  return (env != nullptr && *env != '\0') ? env : DYNRESP_DEFAULT_DATA_DIR;
}

dynresp_status dynresp_case_load(const char* path, dynresp_case** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new dynresp_case{dynresp::load_case(path)};
  });
}

dynresp_status dynresp_case_synthetic(int n, const char* topology, uint64_t seed, dynresp_case** out) {
  return guard([&] {
    need(topology, "topology");
    need(out, "out");
    *out = new dynresp_case{dynresp::make_synthetic_case(n, dynresp::parse_topology(topology), seed)};
  });
}

dynresp_status dynresp_case_write(const dynresp_case* c, const char* path) {
  return guard([&] {
    need(c, "case");
    need(path, "path");
    dynresp::write_case(c->value, path);
  });
}

void dynresp_case_free(dynresp_case* c) { delete c; }

int dynresp_case_n_machines(const dynresp_case* c) { return c ? c->value.n_machines() : 0; }

int dynresp_case_n_buses(const dynresp_case* c) { return c ? c->value.n_buses() : 0; }

dynresp_status dynresp_case_set_uniform_damping(dynresp_case* c, double gamma) {
  return guard([&] {
    need(c, "case");
    dynresp::set_uniform_damping(c->value, gamma);
  });
}

dynresp_status dynresp_case_set_damping_ratios(dynresp_case* c, const double* gammas, size_t n) {
  return guard([&] {
    need(c, "case");
    need(gammas, "gammas");
    dynresp::require(n == static_cast<size_t>(c->value.n_machines()),
                     "expected one damping ratio per machine");
    dynresp::set_damping_ratios(c->value,
                                Eigen::Map<const Eigen::VectorXd>(gammas, static_cast<Eigen::Index>(n)));
  });
}

void dynresp_ambient_config_init(dynresp_ambient_config* cfg) {
  if (cfg == nullptr) return;
  const dynresp::AmbientConfig d;
  cfg->duration_s = d.duration_s;
  cfg->input_mode = DYNRESP_GENERATOR_WHITE;
  cfg->alpha = d.alpha;
  cfg->seed = 0;
  cfg->sample_rate_hz = d.sample_rate_hz;
  cfg->dt = 0.01;
  cfg->measurement_noise_rel = d.measurement_noise_rel;
  cfg->freq_filter_on = 0;
  cfg->freq_filter_cutoff_hz = d.freq_filter_cutoff_hz;
  cfg->freq_filter_order = d.freq_filter_order;
  cfg->modulation_period_s = 0.0;
  cfg->modulation_depth = d.modulation_depth;
  cfg->outputs = nullptr;
  cfg->record_inputs = 0;
}

dynresp_status dynresp_simulate_ambient(const dynresp_case* c, const dynresp_ambient_config* cfg,
                                        dynresp_trace** out) {
  return guard([&] {
    need(c, "case");
    need(cfg, "config");
    need(out, "out");
    dynresp::require(cfg->input_mode == DYNRESP_GENERATOR_WHITE || cfg->input_mode == DYNRESP_LOAD_PERTURB,
                     "unknown input mode");
    dynresp::AmbientConfig a;
    a.duration_s = cfg->duration_s;
    a.input_mode = cfg->input_mode == DYNRESP_LOAD_PERTURB ? dynresp::InputMode::kLoadPerturb
                                                           : dynresp::InputMode::kGeneratorWhite;
    a.alpha = cfg->alpha;
    a.seed = cfg->seed;
    a.sample_rate_hz = cfg->sample_rate_hz;
    a.measurement_noise_rel = cfg->measurement_noise_rel;
    a.freq_filter_on = cfg->freq_filter_on != 0;
    a.freq_filter_cutoff_hz = cfg->freq_filter_cutoff_hz;
    a.freq_filter_order = cfg->freq_filter_order;
    a.modulation_period_s = cfg->modulation_period_s;
    a.modulation_depth = cfg->modulation_depth;
    a.outputs = parse_outputs(cfg->outputs);
    a.record_inputs = cfg->record_inputs != 0;
    auto* t = new dynresp_trace{dynresp::simulate_ambient(c->value, a, cfg->dt), {}};
    t->refresh();
    *out = t;
  });
}

dynresp_status dynresp_simulate_impulse(const dynresp_case* c, int source, double dt, double horizon_s,
                                        dynresp_trace** out) {
  return guard([&] {
    need(c, "case");
    need(out, "out");
    auto* t = new dynresp_trace{dynresp::simulate_impulse(c->value, source - 1, dt, horizon_s), {}};
    t->refresh();
    *out = t;
  });
}

dynresp_status dynresp_trace_map_outputs(dynresp_trace* t, const dynresp_case* c, const char* outputs) {
  return guard([&] {
    need(t, "trace");
    need(c, "case");
    t->value = dynresp::map_outputs(t->value, c->value, parse_outputs(outputs));
    t->refresh();
  });
}

dynresp_status dynresp_trace_degrade_frequency(dynresp_trace* t, double cutoff_hz, int order) {
  return guard([&] {
    need(t, "trace");
    t->value = dynresp::degrade_frequency(t->value, cutoff_hz, order);
  });
}

dynresp_status dynresp_trace_add_noise(dynresp_trace* t, double rel, uint64_t seed) {
  return guard([&] {
    need(t, "trace");
    t->value = dynresp::add_measurement_noise(t->value, rel, seed);
  });
}

dynresp_status dynresp_trace_write(const dynresp_trace* t, const char* path) {
  return guard([&] {
    need(t, "trace");
    need(path, "path");
    dynresp::write_trace(t->value, path);
  });
}

dynresp_status dynresp_trace_read(const char* path, dynresp_trace** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto* t = new dynresp_trace{dynresp::read_trace(path), {}};
    t->refresh();
    *out = t;
  });
}

void dynresp_trace_free(dynresp_trace* t) { delete t; }

int dynresp_trace_n_channels(const dynresp_trace* t) { return t ? t->value.n_channels() : 0; }

size_t dynresp_trace_n_samples(const dynresp_trace* t) {
  return t ? static_cast<size_t>(t->value.n_samples()) : 0;
}

double dynresp_trace_sample_rate(const dynresp_trace* t) { return t ? t->value.sample_rate_hz : 0.0; }

double dynresp_trace_start_time(const dynresp_trace* t) { return t ? t->value.start_time_s : 0.0; }

const char* dynresp_trace_channel_name(const dynresp_trace* t, int index) {
  if (t == nullptr || index < 0 || index >= static_cast<int>(t->names.size())) return nullptr;
  return t->names[static_cast<size_t>(index)].c_str();
}

dynresp_status dynresp_trace_channel_data(const dynresp_trace* t, int index, double* out, size_t len) {
  return guard([&] {
    need(t, "trace");
    need(out, "out");
    dynresp::require(index >= 0 && index < t->value.n_channels(), "channel index out of range");
    const size_t n = std::min(len, static_cast<size_t>(t->value.n_samples()));
    for (size_t j = 0; j < n; ++j) out[j] = t->value.data(index, static_cast<Eigen::Index>(j));
  });
}

dynresp_responses* dynresp_responses_create(void) { return new (std::nothrow) dynresp_responses(); }

void dynresp_responses_free(dynresp_responses* r) { delete r; }

size_t dynresp_responses_count(const dynresp_responses* r) { return r ? r->items.size() : 0; }

size_t dynresp_response_size(const dynresp_responses* r, size_t i) {
  return (r != nullptr && i < r->items.size()) ? r->items[i].size() : 0;
}

dynresp_status dynresp_response_values(const dynresp_responses* r, size_t i, double* out, size_t len) {
  return guard([&] {
    need(out, "out");
    const auto& item = response_at(r, i);
    std::copy_n(item.values.begin(), std::min(len, item.size()), out);
  });
}

dynresp_status dynresp_response_lags(const dynresp_responses* r, size_t i, double* out, size_t len) {
  return guard([&] {
    need(out, "out");
    const auto& item = response_at(r, i);
    std::copy_n(item.lags_s.begin(), std::min(len, item.lags_s.size()), out);
  });
}

const char* dynresp_response_field(const dynresp_responses* r, size_t i, const char* field) {
  if (r == nullptr || field == nullptr || i >= r->items.size()) return nullptr;
  const auto& item = r->items[i];
  const std::string f = field;
  if (f == "source") return item.source.c_str();
  if (f == "target") return item.target.c_str();
  if (f == "kind") return item.kind.c_str();
  if (f == "relation") return item.relation.c_str();
  return nullptr;
}

double dynresp_response_scale(const dynresp_responses* r, size_t i) {
  return (r != nullptr && i < r->items.size()) ? r->items[i].scale_applied : 0.0;
}

dynresp_status dynresp_responses_write(const dynresp_responses* r, const char* path) {
  return guard([&] {
    need(r, "responses");
    need(path, "path");
    dynresp::write_responses(r->items, path);
  });
}

dynresp_status dynresp_responses_read(const char* path, dynresp_responses* r) {
  return guard([&] {
    need(path, "path");
    need(r, "responses");
    auto items = dynresp::read_responses(path);
    r->items.insert(r->items.end(), items.begin(), items.end());
  });
}

dynresp_status dynresp_recover(const dynresp_trace* t, const char* config, dynresp_responses* into) {
  return guard([&] {
    need(t, "trace");
    need(config, "config");
    need(into, "responses");
    const auto cfg = dynresp::RecoveryConfig::parse(config, "recovery config");
    into->items.push_back(dynresp::recover(t->value, cfg));
  });
}

dynresp_status dynresp_model_response(const dynresp_case* c, int truth, const char* source_channel,
                                      const char* target_channel, const char* response, double step,
                                      size_t count, dynresp_responses* into) {
  return guard([&] {
    need(c, "case");
    need(source_channel, "source_channel");
    need(target_channel, "target_channel");
    need(response, "response");
    need(into, "responses");
    dynresp::require(step > 0.0 && count >= 2, "need a positive lag step and at least two lags");
    dynresp::TruthSource src = dynresp::TruthSource::kSimulated;
    if (truth == DYNRESP_TRUTH_MODAL ||
        (truth == DYNRESP_TRUTH_AUTO && c->value.uniform_damping_ratio().has_value())) {
      src = dynresp::TruthSource::kModal;
    } else {
      dynresp::require(truth == DYNRESP_TRUTH_AUTO || truth == DYNRESP_TRUTH_SIMULATED,
                       "unknown truth mode");
    }
    const std::string resp = response;
    dynresp::require(resp == "frequency" || resp == "angle", "response must be frequency or angle");
    const dynresp::RecoveryPair pair{source_channel, target_channel,
                                     resp == "frequency" ? dynresp::ResponseKind::kFrequency
                                                         : dynresp::ResponseKind::kAngle};
    const auto lags = dynresp::uniform_lags(step, count);
    into->items.push_back(dynresp::truth_response(c->value, src, pair, lags));
  });
}

dynresp_status dynresp_evaluate(const dynresp_responses* est, size_t i, const dynresp_responses* truth,
                                size_t j, dynresp_report* out) {
  return guard([&] {
    need(out, "out");
    const auto& e = response_at(est, i);
    const dynresp::ImpulseResponse* t = truth != nullptr ? &response_at(truth, j) : nullptr;
    const auto rep = dynresp::make_report(e, t);
    out->normalized_mse = rep.normalized_mse;
    out->nadir_time_s = rep.nadir_time_s;
    out->nadir_value = rep.nadir_value;
    out->nadir_interior = rep.nadir_interior ? 1 : 0;
    out->est_osc_freq_hz = rep.est_osc_freq_hz;
    out->est_damping = rep.est_damping;
    out->scale_applied = rep.scale_applied;
  });
}

dynresp_status dynresp_evaluate_all(const dynresp_responses* est, const dynresp_responses* truth,
                                    const char* report_path, char** table_out) {
  return guard([&] {
    need(est, "estimates");
    if (truth != nullptr) {
      dynresp::require(truth->items.size() == est->items.size(),
                       "estimate and truth files hold " + std::to_string(est->items.size()) + " and " +
                           std::to_string(truth->items.size()) + " curves");
    }
    std::vector<dynresp::RecoveryReport> reports;
    for (size_t i = 0; i < est->items.size(); ++i) {
      reports.push_back(dynresp::make_report(est->items[i], truth ? &truth->items[i] : nullptr));
    }
    if (report_path != nullptr) {
      dynresp::detail::write_file_atomic(report_path, dynresp::format_report_csv(reports));
    }
    if (table_out != nullptr) *table_out = dup_string(dynresp::format_report_table(reports));
  });
}

dynresp_status dynresp_normalized_mse(const double* truth, const double* est, size_t n, double* out) {
  return guard([&] {
    need(truth, "truth");
    need(est, "est");
    need(out, "out");
    *out = dynresp::normalized_mse(std::span<const double>(truth, n), std::span<const double>(est, n));
  });
}

dynresp_status dynresp_propagation_speed(const double* lags_s, const double* distances, size_t n,
                                         double* out) {
  return guard([&] {
    need(lags_s, "lags");
    need(distances, "distances");
    need(out, "out");
    *out = dynresp::propagation_speed(std::span<const double>(lags_s, n),
                                      std::span<const double>(distances, n));
  });
}

dynresp_status dynresp_reproduce(const char* name, const char* out_dir, int has_seed, uint64_t seed,
                                 const char* data_dir, char** summary_out) {
  return guard([&] {
    need(name, "name");
    need(out_dir, "out_dir");
    const std::filesystem::path dir = data_dir != nullptr ? data_dir : dynresp_default_data_dir();
    const auto res = dynresp::reproduce(name, out_dir,
                                        has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt, dir);
    if (summary_out != nullptr) *summary_out = dup_string(res.summary);
  });
}

dynresp_status dynresp_run_experiment(const char* spec_path, const char* out_dir, int has_seed,
                                      uint64_t seed, char** summary_out) {
  return guard([&] {
    need(spec_path, "spec_path");
    need(out_dir, "out_dir");
    auto spec = dynresp::ExperimentSpec::load(spec_path);
    if (has_seed) spec.seed = seed;
    const auto res = dynresp::run_experiment(spec, out_dir);
    if (summary_out != nullptr) *summary_out = dup_string(res.summary);
  });
}

}  // extern "C"
