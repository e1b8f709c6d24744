#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "dynresp/dynresp.h"

namespace {

std::string case_file(const char* name) {
  return (std::filesystem::path(DYNRESP_TEST_DATA_DIR) / "cases" / name).string();
}

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / (std::string("dynresp_capi_") + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("version and errors") {
  CHECK(std::strlen(dynresp_version()) > 0);
  dynresp_case* c = nullptr;
  CHECK(dynresp_case_load("/nonexistent/x.case", &c) == DYNRESP_E_IO);
  CHECK(c == nullptr);
  CHECK(std::string(dynresp_last_error()).find("/nonexistent/x.case") != std::string::npos);
  CHECK(dynresp_case_load(nullptr, &c) == DYNRESP_E_INVALID_ARGUMENT);
  CHECK(dynresp_case_synthetic(3, "mesh", 1, &c) != DYNRESP_OK);
}

TEST_CASE("cases") {
  dynresp_case* c = nullptr;
  REQUIRE(dynresp_case_load(case_file("wscc9_reduced.case").c_str(), &c) == DYNRESP_OK);
  CHECK(dynresp_case_n_machines(c) == 3);
  CHECK(dynresp_case_n_buses(c) == 9);
  const double ratios[] = {0.1, 0.3, 0.2};
  CHECK(dynresp_case_set_damping_ratios(c, ratios, 3) == DYNRESP_OK);
  CHECK(dynresp_case_set_damping_ratios(c, ratios, 2) == DYNRESP_E_INVALID_ARGUMENT);
  CHECK(dynresp_case_set_uniform_damping(c, -1.0) != DYNRESP_OK);
  dynresp_case_free(c);

  dynresp_case* s = nullptr;
  REQUIRE(dynresp_case_synthetic(5, "ring", 7, &s) == DYNRESP_OK);
  const auto dir = scratch("case");
  const std::string path = (dir / "ring.case").string();
  CHECK(dynresp_case_write(s, path.c_str()) == DYNRESP_OK);
  dynresp_case* back = nullptr;
  REQUIRE(dynresp_case_load(path.c_str(), &back) == DYNRESP_OK);
  CHECK(dynresp_case_n_machines(back) == 5);
  dynresp_case_free(back);
  dynresp_case_free(s);
}

TEST_CASE("simulate, recover and evaluate through the C API") {
  dynresp_case* c = nullptr;
  REQUIRE(dynresp_case_load(case_file("wscc9_reduced.case").c_str(), &c) == DYNRESP_OK);

  dynresp_ambient_config cfg;
  dynresp_ambient_config_init(&cfg);
  CHECK(cfg.duration_s == 600.0);
  CHECK(cfg.sample_rate_hz == 100.0);
  cfg.seed = 1;
  cfg.outputs = "bus:7 line:7-8";
  dynresp_trace* t = nullptr;
  REQUIRE(dynresp_simulate_ambient(c, &cfg, &t) == DYNRESP_OK);
  CHECK(dynresp_trace_n_samples(t) == 60000);
  CHECK(dynresp_trace_sample_rate(t) == 100.0);
  CHECK(dynresp_trace_n_channels(t) == 9);
  CHECK(std::string(dynresp_trace_channel_name(t, 0)) == "rotor_angle:1");
  CHECK(dynresp_trace_channel_name(t, 99) == nullptr);
  std::vector<double> buf(10);
  CHECK(dynresp_trace_channel_data(t, 0, buf.data(), buf.size()) == DYNRESP_OK);

  const auto dir = scratch("sim");
  const std::string trace_path = (dir / "trace.csv").string();
  REQUIRE(dynresp_trace_write(t, trace_path.c_str()) == DYNRESP_OK);
  dynresp_trace* read = nullptr;
  REQUIRE(dynresp_trace_read(trace_path.c_str(), &read) == DYNRESP_OK);
  CHECK(dynresp_trace_n_samples(read) == 60000);

  dynresp_responses* est = dynresp_responses_create();
  dynresp_responses* truth = dynresp_responses_create();
  REQUIRE(dynresp_recover(read, "source=2\ntarget=rotor_freq:1\nmax_lag_s=10\n", est) == DYNRESP_OK);
  REQUIRE(dynresp_responses_count(est) == 1);
  CHECK(std::string(dynresp_response_field(est, 0, "relation")) == "freq-freq/order0");
  CHECK(dynresp_response_field(est, 0, "bogus") == nullptr);
  const size_t n = dynresp_response_size(est, 0);
  CHECK(n == 1001);
  REQUIRE(dynresp_model_response(c, DYNRESP_TRUTH_MODAL, "rotor_freq:2", "rotor_freq:1", "frequency",
                                 0.01, n, truth) == DYNRESP_OK);
  dynresp_report rep;
  REQUIRE(dynresp_evaluate(est, 0, truth, 0, &rep) == DYNRESP_OK);
  CHECK(rep.normalized_mse <= 0.35);
  CHECK(rep.scale_applied == doctest::Approx(2 * 0.2 / 1.0));

  char* table = nullptr;
  const std::string report_path = (dir / "report.csv").string();
  REQUIRE(dynresp_evaluate_all(est, truth, report_path.c_str(), &table) == DYNRESP_OK);
  CHECK(std::string(table).find("freq-freq/order0") != std::string::npos);
  dynresp_string_free(table);
  CHECK(std::filesystem::exists(report_path));

  const std::string resp_path = (dir / "recovered.csv").string();
  REQUIRE(dynresp_responses_write(est, resp_path.c_str()) == DYNRESP_OK);
  dynresp_responses* again = dynresp_responses_create();
  REQUIRE(dynresp_responses_read(resp_path.c_str(), again) == DYNRESP_OK);
  std::vector<double> a(n), b(n);
  dynresp_response_values(est, 0, a.data(), n);
  dynresp_response_values(again, 0, b.data(), n);
  CHECK(a == b);

  CHECK(dynresp_recover(read, "source=2\ntarget=bus_angle:99\n", est) != DYNRESP_OK);
  CHECK(std::string(dynresp_last_error()).find("bus_angle:99") != std::string::npos);

  dynresp_responses_free(again);
  dynresp_responses_free(est);
  dynresp_responses_free(truth);
  dynresp_trace_free(read);
  dynresp_trace_free(t);
  dynresp_case_free(c);
}

TEST_CASE("impulse simulation and simulated truth") {
  dynresp_case* c = nullptr;
  REQUIRE(dynresp_case_load(case_file("two_machine.case").c_str(), &c) == DYNRESP_OK);
  dynresp_trace* t = nullptr;
  REQUIRE(dynresp_simulate_impulse(c, 1, 0.001, 20.0, &t) == DYNRESP_OK);
  CHECK(dynresp_trace_start_time(t) == doctest::Approx(-0.0005));
  CHECK(dynresp_simulate_impulse(c, 3, 0.001, 20.0, &t) == DYNRESP_E_INVALID_ARGUMENT);

  dynresp_responses* r = dynresp_responses_create();
  REQUIRE(dynresp_model_response(c, DYNRESP_TRUTH_SIMULATED, "rotor_freq:1", "rotor_freq:1", "frequency",
                                 0.01, 100, r) == DYNRESP_OK);
  std::vector<double> v(100);
  dynresp_response_values(r, 0, v.data(), v.size());
  CHECK(v[0] == doctest::Approx(1.0));
  dynresp_responses_free(r);
  dynresp_trace_free(t);
  dynresp_case_free(c);
}

TEST_CASE("numeric helpers") {
  const double truth[] = {1, 2, 3};
  const double neg[] = {-1, -2, -3};
  double out = 0.0;
  REQUIRE(dynresp_normalized_mse(truth, neg, 3, &out) == DYNRESP_OK);
  CHECK(out == 2.0);
  const double lags[] = {0, 0.1};
  const double dist[] = {0, 100};
  REQUIRE(dynresp_propagation_speed(lags, dist, 2, &out) == DYNRESP_OK);
  CHECK(out == doctest::Approx(1000.0));
  const double flat[] = {0, 0};
  CHECK(dynresp_propagation_speed(flat, dist, 2, &out) != DYNRESP_OK);
}

TEST_CASE("reproduce through the C API") {
  char* summary = nullptr;
  const auto dir = scratch("repro");
  REQUIRE(dynresp_reproduce("nadir-lag", dir.string().c_str(), 0, 0, DYNRESP_TEST_DATA_DIR, &summary) ==
          DYNRESP_OK);
  CHECK(std::string(summary).find("nadir") != std::string::npos);
  dynresp_string_free(summary);
  CHECK(dynresp_reproduce("nope", dir.string().c_str(), 0, 0, DYNRESP_TEST_DATA_DIR, nullptr) != DYNRESP_OK);
}
