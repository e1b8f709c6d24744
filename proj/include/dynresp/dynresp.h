#ifndef DYNRESP_DYNRESP_H
#define DYNRESP_DYNRESP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DYNRESP_BUILDING_LIBRARY)
#define DYNRESP_API __declspec(dllexport)
#else
#define DYNRESP_API __declspec(dllimport)
#endif
#else
#define DYNRESP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. On failure a message is available from dynresp_last_error()
 * on the calling thread until the next failing call. */
typedef enum dynresp_status {
  DYNRESP_OK = 0,
  DYNRESP_E_INVALID_ARGUMENT = 1,
  DYNRESP_E_IO = 2,
  DYNRESP_E_PARSE = 3,
  DYNRESP_E_NUMERIC = 4,
  DYNRESP_E_INTERNAL = 5
} dynresp_status;

typedef struct dynresp_case dynresp_case;
typedef struct dynresp_trace dynresp_trace;
typedef struct dynresp_responses dynresp_responses;

DYNRESP_API const char* dynresp_version(void);
DYNRESP_API const char* dynresp_last_error(void);

/* Strings returned through char** are owned by the caller. */
DYNRESP_API void dynresp_string_free(char* s);

/* Data directory with bundled cases and experiments: $DYNRESP_DATA_DIR if
 * set, otherwise the directory configured at build time. */
DYNRESP_API const char* dynresp_default_data_dir(void);

/* ---- cases ------------------------------------------------------------ */

DYNRESP_API dynresp_status dynresp_case_load(const char* path, dynresp_case** out);

/* topology: "chain", "ring" or "complete". */
DYNRESP_API dynresp_status dynresp_case_synthetic(int n, const char* topology, uint64_t seed,
                                                  dynresp_case** out);
DYNRESP_API dynresp_status dynresp_case_write(const dynresp_case* c, const char* path);
DYNRESP_API void dynresp_case_free(dynresp_case* c);
DYNRESP_API int dynresp_case_n_machines(const dynresp_case* c);
DYNRESP_API int dynresp_case_n_buses(const dynresp_case* c);

/* D = gamma * M, either uniformly or with one ratio per machine. */
DYNRESP_API dynresp_status dynresp_case_set_uniform_damping(dynresp_case* c, double gamma);
DYNRESP_API dynresp_status dynresp_case_set_damping_ratios(dynresp_case* c, const double* gammas,
                                                           size_t n);

/* ---- simulation ------------------------------------------------------- */

typedef enum dynresp_input_mode {
  DYNRESP_GENERATOR_WHITE = 0,
  DYNRESP_LOAD_PERTURB = 1
} dynresp_input_mode;

typedef struct dynresp_ambient_config {
  double duration_s;
  int input_mode; /* dynresp_input_mode; load perturbation uses the identity input matrix */
  double alpha;
  uint64_t seed;
  double sample_rate_hz;
  double dt; /* integration step; 1/sample_rate_hz must be a multiple of it */
  double measurement_noise_rel;
  int freq_filter_on;
  double freq_filter_cutoff_hz;
  int freq_filter_order;
  double modulation_period_s; /* <= 0 disables */
  double modulation_depth;
  const char* outputs; /* space-separated specs: "bus:7 line:7-8"; may be NULL */
  int record_inputs;
} dynresp_ambient_config;

/* Fills the defaults: 600 s, generator white noise, alpha 1, seed 0, 100 Hz,
 * dt 0.01, noise 2e-5, filter off (1.5 Hz, order 2), no modulation. */
DYNRESP_API void dynresp_ambient_config_init(dynresp_ambient_config* cfg);

DYNRESP_API dynresp_status dynresp_simulate_ambient(const dynresp_case* c,
                                                    const dynresp_ambient_config* cfg,
                                                    dynresp_trace** out);

/* source is a one-based machine id. */
DYNRESP_API dynresp_status dynresp_simulate_impulse(const dynresp_case* c, int source, double dt,
                                                    double horizon_s, dynresp_trace** out);

/* ---- traces ----------------------------------------------------------- */

DYNRESP_API dynresp_status dynresp_trace_map_outputs(dynresp_trace* t, const dynresp_case* c,
                                                     const char* outputs);
DYNRESP_API dynresp_status dynresp_trace_degrade_frequency(dynresp_trace* t, double cutoff_hz,
                                                           int order);
DYNRESP_API dynresp_status dynresp_trace_add_noise(dynresp_trace* t, double rel, uint64_t seed);

/* CSV plus "<path>.meta" sidecar. */
DYNRESP_API dynresp_status dynresp_trace_write(const dynresp_trace* t, const char* path);
DYNRESP_API dynresp_status dynresp_trace_read(const char* path, dynresp_trace** out);
DYNRESP_API void dynresp_trace_free(dynresp_trace* t);

DYNRESP_API int dynresp_trace_n_channels(const dynresp_trace* t);
DYNRESP_API size_t dynresp_trace_n_samples(const dynresp_trace* t);
DYNRESP_API double dynresp_trace_sample_rate(const dynresp_trace* t);
DYNRESP_API double dynresp_trace_start_time(const dynresp_trace* t);

/* Returns a pointer valid until the trace is modified or freed, or NULL. */
DYNRESP_API const char* dynresp_trace_channel_name(const dynresp_trace* t, int index);

/* Copies min(len, n_samples) samples of the channel into out. */
DYNRESP_API dynresp_status dynresp_trace_channel_data(const dynresp_trace* t, int index, double* out,
                                                      size_t len);

/* ---- responses -------------------------------------------------------- */

DYNRESP_API dynresp_responses* dynresp_responses_create(void);
DYNRESP_API void dynresp_responses_free(dynresp_responses* r);
DYNRESP_API size_t dynresp_responses_count(const dynresp_responses* r);
DYNRESP_API size_t dynresp_response_size(const dynresp_responses* r, size_t i);

/* Copies min(len, size) values / lags into out. */
DYNRESP_API dynresp_status dynresp_response_values(const dynresp_responses* r, size_t i, double* out,
                                                   size_t len);
DYNRESP_API dynresp_status dynresp_response_lags(const dynresp_responses* r, size_t i, double* out,
                                                 size_t len);

/* field: "source", "target", "kind" or "relation". Pointer valid until r changes. */
DYNRESP_API const char* dynresp_response_field(const dynresp_responses* r, size_t i,
                                               const char* field);
DYNRESP_API double dynresp_response_scale(const dynresp_responses* r, size_t i);

DYNRESP_API dynresp_status dynresp_responses_write(const dynresp_responses* r, const char* path);

/* Appends the responses stored in the CSV to r. */
DYNRESP_API dynresp_status dynresp_responses_read(const char* path, dynresp_responses* r);

/* ---- recovery and model curves ------------------------------------------ */

/* Runs the recovery pipeline with a key=value configuration (source, target,
 * passband, response, scaling, gamma, alpha, max_lag_s, ...) and appends the
 * recovered curve to `into`. */
DYNRESP_API dynresp_status dynresp_recover(const dynresp_trace* t, const char* config,
                                           dynresp_responses* into);

typedef enum dynresp_truth {
  DYNRESP_TRUTH_AUTO = 0, /* modal when damping is uniform, else simulated */
  DYNRESP_TRUTH_MODAL = 1,
  DYNRESP_TRUTH_SIMULATED = 2
} dynresp_truth;

/* Model response to an impulse at the machine named by source_channel's
 * location, observed at target_channel; response is "frequency" or "angle".
 * Lags are 0, step, ..., (count - 1) step. Appends to `into`. */
DYNRESP_API dynresp_status dynresp_model_response(const dynresp_case* c, int truth,
                                                  const char* source_channel,
                                                  const char* target_channel, const char* response,
                                                  double step, size_t count, dynresp_responses* into);

/* ---- evaluation ------------------------------------------------------- */

typedef struct dynresp_report {
  double normalized_mse; /* NaN without truth */
  double nadir_time_s;
  double nadir_value;
  int nadir_interior;
  double est_osc_freq_hz; /* NaN when too few cycles */
  double est_damping;
  double scale_applied;
} dynresp_report;

/* Metrics for estimate i, against truth j when truth is not NULL. */
DYNRESP_API dynresp_status dynresp_evaluate(const dynresp_responses* est, size_t i,
                                            const dynresp_responses* truth, size_t j,
                                            dynresp_report* out);

/* Evaluates every estimate (paired by index with truth when given), writes
 * the report CSV to report_path when not NULL and returns a printable table
 * through table_out when not NULL. */
DYNRESP_API dynresp_status dynresp_evaluate_all(const dynresp_responses* est,
                                                const dynresp_responses* truth,
                                                const char* report_path, char** table_out);

DYNRESP_API dynresp_status dynresp_normalized_mse(const double* truth, const double* est, size_t n,
                                                  double* out);

/* Least-squares slope of distance against lag, miles per second. */
DYNRESP_API dynresp_status dynresp_propagation_speed(const double* lags_s, const double* distances,
                                                     size_t n, double* out);

/* ---- experiments ------------------------------------------------------ */

/* Runs a bundled experiment (data_dir may be NULL for the default). When
 * has_seed is nonzero, seed overrides the experiment's seed. The summary
 * table is returned through summary_out when not NULL. */
DYNRESP_API dynresp_status dynresp_reproduce(const char* name, const char* out_dir, int has_seed,
                                             uint64_t seed, const char* data_dir, char** summary_out);

/* Runs an experiment spec file. */
DYNRESP_API dynresp_status dynresp_run_experiment(const char* spec_path, const char* out_dir,
                                                  int has_seed, uint64_t seed, char** summary_out);

#ifdef __cplusplus
}
#endif

#endif
