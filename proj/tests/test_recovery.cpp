#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dynresp/evaluate.hpp"
#include "dynresp/modal.hpp"
#include "dynresp/recovery.hpp"
#include "dynresp/simulate.hpp"
#include "test_util.hpp"

using namespace dynresp;
using std::numbers::pi;
using testutil::contains;
using testutil::error_of;

namespace {

const GridCase& wscc() {
  static const GridCase c = load_case(testutil::case_path("wscc9_reduced.case"));
  return c;
}

// Ten-minute generator-white record at 100 Hz, with or without measurement noise.
const SignalTrace& ambient(bool noisy) {
  static const auto make = [](bool with_noise) {
    AmbientConfig cfg;
    cfg.duration_s = 600.0;
    cfg.seed = 1;
    cfg.measurement_noise_rel = with_noise ? 2e-5 : 0.0;
    cfg.outputs = {OutputSpec::parse("bus:7"), OutputSpec::parse("bus:8"),
                   OutputSpec::parse("line:7-8")};
    return simulate_ambient(wscc(), cfg, 0.01);
  };
  static const SignalTrace clean = make(false);
  static const SignalTrace noisy_trace = make(true);
  return noisy ? noisy_trace : clean;
}

SignalTrace tiny_trace() {
  SignalTrace t;
  t.sample_rate_hz = 100.0;
  const Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(8);
  for (const char* name : {"bus_angle:2", "bus_angle:7", "bus_freq:7", "rotor_angle:3",
                           "rotor_freq:3", "line_flow:7-8"}) {
    t.add_channel(Channel::parse(name), z);
  }
  return t;
}

std::string name_of(const SignalTrace& t, int i) { return t.channels[static_cast<std::size_t>(i)].name(); }

}  // namespace

TEST_CASE("relation tags and orders") {
  using K = ChannelKind;
  const Relation ff = relation_for(K::kRotorFreq, K::kRotorFreq, ResponseKind::kFrequency);
  CHECK(ff.tag == "freq-freq/order0");
  CHECK(ff.differentiation_order == 0);
  CHECK(ff.sign == 1.0);
  const Relation aa2 = relation_for(K::kRotorAngle, K::kRotorAngle, ResponseKind::kFrequency);
  CHECK(aa2.tag == "angle-angle/order2");
  CHECK(aa2.sign == -1.0);
  const Relation aa1 = relation_for(K::kBusAngle, K::kBusAngle, ResponseKind::kAngle);
  CHECK(aa1.tag == "angle-angle/order1");
  const Relation af = relation_for(K::kRotorAngle, K::kRotorFreq, ResponseKind::kFrequency);
  CHECK(af.differentiation_order == 1);
  CHECK(af.sign == 1.0);
  const Relation flow = relation_for(K::kBusAngle, K::kLineFlow, ResponseKind::kAngle);
  CHECK(flow.tag == "angle-flow/order1");
  const Relation fa = relation_for(K::kBusFreq, K::kBusAngle, ResponseKind::kAngle);
  CHECK(fa.differentiation_order == 0);
  CHECK(fa.tag == "freq-angle/order0");
  CHECK_FALSE(error_of([] { relation_for(K::kRotorFreq, K::kRotorFreq, ResponseKind::kAngle); }).empty());
}

TEST_CASE("select_channels") {
  const SignalTrace t = tiny_trace();
  SUBCASE("bare bus locations map to bus angles") {
    const ChannelPair p = select_channels(t, "2", "7");
    CHECK(name_of(t, p.source) == "bus_angle:2");
    CHECK(name_of(t, p.target) == "bus_angle:7");
  }
  SUBCASE("line targets") {
    const ChannelPair p = select_channels(t, "2", "7-8");
    CHECK(name_of(t, p.target) == "line_flow:7-8");
    CHECK(name_of(t, p.source) == "bus_angle:2");
  }
  SUBCASE("source falls back to the rotor channel of the target quantity") {
    const ChannelPair p = select_channels(t, "3", "bus_freq:7");
    CHECK(name_of(t, p.source) == "rotor_freq:3");
  }
  SUBCASE("full names are used verbatim") {
    const ChannelPair p = select_channels(t, "rotor_angle:3", "bus_freq:7");
    CHECK(name_of(t, p.source) == "rotor_angle:3");
    CHECK(name_of(t, p.target) == "bus_freq:7");
  }
  SUBCASE("missing channels list what is available") {
    const std::string msg = error_of([&] { select_channels(t, "2", "99"); });
    CHECK(contains(msg, "bus_angle:99"));
    CHECK(contains(msg, "line_flow:7-8"));
  }
}

TEST_CASE("preprocess") {
  const double fs = 100.0;
  const Eigen::Index n = 30000;
  SignalTrace t;
  t.sample_rate_hz = fs;
  Eigen::RowVectorXd dc = Eigen::RowVectorXd::Constant(n, 4.0);
  Eigen::RowVectorXd s(n), ramp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double time = static_cast<double>(i) / fs;
    s(i) = std::sin(2 * pi * 0.5 * time);
    ramp(i) = 0.3 * time;
  }
  t.add_channel(Channel::parse("rotor_freq:1"), dc);
  t.add_channel(Channel::parse("rotor_freq:2"), s);

  SUBCASE("DC is removed and a passband sine survives") {
    const SignalTrace p = preprocess(t, 0.1, 0.8, false);
    CHECK(p.data.row(0).cwiseAbs().maxCoeff() <= 1e-6);
    const Eigen::RowVectorXd mid = p.data.row(1).segment(5000, 20000);
    CHECK(mid.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(0.05));
    CHECK((mid - s.segment(5000, 20000)).norm() / s.segment(5000, 20000).norm() <= 0.05);
    for (int i = 0; i < 2; ++i) {
      const Eigen::RowVectorXd x = p.data.row(i);
      const double sd = std::sqrt((x.array() - x.mean()).square().mean());
      CHECK(std::abs(x.mean()) <= 1e-6 * std::max(sd, 1e-300) + 1e-15);
    }
  }
  SUBCASE("common ramp is removed by reference subtraction") {
    SignalTrace a;
    a.sample_rate_hz = fs;
    a.add_channel(Channel::parse("bus_angle:1"), s + ramp);
    a.add_channel(Channel::parse("bus_angle:2"), -s + ramp);
    a.add_channel(Channel::parse("bus_angle:3"), ramp);
    const SignalTrace ref = preprocess(a, 0.1, 0.8, true);
    a.data.row(0) = s;
    a.data.row(1) = -s;
    a.data.row(2).setZero();
    const SignalTrace clean = preprocess(a, 0.1, 0.8, false);
    CHECK((ref.data - clean.data).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("record must cover ten filter time constants") {
    SignalTrace shortt;
    shortt.sample_rate_hz = fs;
    shortt.add_channel(Channel::parse("rotor_freq:1"), Eigen::RowVectorXd::Zero(1000));
    CHECK_FALSE(error_of([&] { preprocess(shortt, 0.1, 0.8, false); }).empty());
  }
  SUBCASE("passband above Nyquist") {
    CHECK_FALSE(error_of([&] { preprocess(t, 0.1, 60.0, false); }).empty());
  }
}

TEST_CASE("cross_correlate") {
  SUBCASE("unit impulse") {
    std::vector<double> x(100, 0.0);
    x[0] = 1.0;
    for (XcorrMethod m : {XcorrMethod::kDirect, XcorrMethod::kFft}) {
      const auto c = cross_correlate(x, x, 10, m);
      CHECK(c[0] == doctest::Approx(0.01));
      for (std::size_t i = 1; i < c.size(); ++i) CHECK(std::abs(c[i]) <= 1e-15);
    }
  }
  SUBCASE("x lagging y by ten samples peaks at lag ten") {
    std::vector<double> x(200, 0.0), y(200, 0.0);
    x[50] = 1.0;
    y[40] = 1.0;
    const auto c = cross_correlate(x, y, 20, XcorrMethod::kDirect);
    CHECK(c[10] == doctest::Approx(1.0 / 200));
  }
  SUBCASE("sinusoid autocorrelation") {
    const double fs = 30.0, amp = 2.0;
    std::vector<double> x(200000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2 * pi * 0.5 * static_cast<double>(i) / fs);
    const auto c = cross_correlate(x, x, 90);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double expect = amp * amp / 2 * std::cos(2 * pi * 0.5 * static_cast<double>(k) / fs);
      CHECK(std::abs(c[k] - expect) <= 2e-3);
    }
  }
  SUBCASE("fft agrees with direct") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::vector<double> x(10000), y(10000);
    for (auto& v : x) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    const auto a = cross_correlate(x, y, 2500, XcorrMethod::kDirect);
    const auto b = cross_correlate(x, y, 2500, XcorrMethod::kFft);
    double m = 0.0, d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      m = std::max(m, std::abs(a[i]));
      d = std::max(d, std::abs(a[i] - b[i]));
    }
    CHECK(d <= 1e-9 * m);
  }
  SUBCASE("errors") {
    std::vector<double> x(10), y(9);
    CHECK_FALSE(error_of([&] { cross_correlate(x, y, 2); }).empty());
    CHECK_FALSE(error_of([&] { cross_correlate(x, x, 10); }).empty());
  }
}

TEST_CASE("differentiate") {
  SUBCASE("constant") {
    const std::vector<double> c(20, 3.0);
    for (double v : differentiate(c, 1, 0.1)) CHECK(v == 0.0);
    for (double v : differentiate(c, 2, 0.1)) CHECK(v == 0.0);
  }
  SUBCASE("sin to cos") {
    const double h = 1e-3;
    std::vector<double> s(6284);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(static_cast<double>(i) * h);
    const auto d = differentiate(s, 1, h);
    double err = 0.0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) err = std::max(err, std::abs(d[i] - std::cos(static_cast<double>(i) * h)));
    CHECK(err <= 1e-6);
  }
  SUBCASE("quadratic, second order") {
    for (double h : {0.01, 0.5, 3.0}) {
      std::vector<double> q(30);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::pow(static_cast<double>(i) * h, 2);
      const auto d = differentiate(q, 2, h);
      for (std::size_t i = 2; i + 2 < q.size(); ++i) CHECK(d[i] == doctest::Approx(2.0).epsilon(1e-9));
    }
  }
  SUBCASE("order 1 twice equals order 2") {
    std::vector<double> x(50);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(0.3 * static_cast<double>(i));
    const auto once = differentiate(x, 1, 0.1);
    CHECK(differentiate(once, 1, 0.1) == differentiate(x, 2, 0.1));
  }
  SUBCASE("too short") {
    CHECK_FALSE(error_of([] { differentiate(std::vector<double>{1, 2, 3, 4}, 2, 1.0); }).empty());
    CHECK_FALSE(error_of([] { differentiate(std::vector<double>{1, 2}, 1, 1.0); }).empty());
  }
}

TEST_CASE("config parsing") {
  const RecoveryConfig cfg = RecoveryConfig::parse(
      "source=2\ntarget=line_flow:7-8\npassband=0.3,0.75\nscaling=nadir_match\nnadir_reference=-2\n"
      "response=angle\nmax_lag_s=12\nmethod=direct\n");
  CHECK(cfg.passband_low_hz == 0.3);
  CHECK(cfg.passband_high_hz == 0.75);
  CHECK(cfg.scaling == Scaling::kNadirMatch);
  CHECK(cfg.nadir_reference == -2.0);
  CHECK(*cfg.response == ResponseKind::kAngle);
  CHECK(*cfg.max_lag_s == 12.0);
  CHECK(cfg.method == XcorrMethod::kDirect);
  const RecoveryConfig back = RecoveryConfig::parse(cfg.format());
  CHECK(back.format() == cfg.format());
  CHECK_FALSE(error_of([] { RecoveryConfig::parse("bogus=1\n"); }).empty());
  CHECK_FALSE(error_of([] { RecoveryConfig::parse("scaling=sometimes\n"); }).empty());
}

TEST_CASE("recovered responses on the compliant case") {
  const GridCase& c = wscc();
  const ModalDecomposition md = decompose(c, 0.2, 1.0);
  const SignalTrace& t = ambient(true);

  RecoveryConfig cfg;
  cfg.source_channel = "2";
  cfg.max_lag_s = 10.0;

  SUBCASE("frequency from frequency data") {
    cfg.target_channel = "rotor_freq:1";
    const ImpulseResponse r = recover(t, cfg);
    CHECK(r.relation == "freq-freq/order0");
    CHECK(r.kind == "frequency");
    CHECK(r.lags_s.back() == doctest::Approx(10.0));
    const auto truth = impulse_frequency(md, 1, 0, r.lags_s);
    CHECK(normalized_mse(truth, r) <= 0.35);
  }
  SUBCASE("angle from angle data") {
    cfg.target_channel = "rotor_angle:3";
    cfg.subtract_reference_angle = false;
    const ImpulseResponse r = recover(t, cfg);
    CHECK(r.relation == "angle-angle/order1");
    const auto truth = impulse_angle(md, 1, 2, r.lags_s);
    CHECK(normalized_mse(truth, r) <= 0.25);
  }
  SUBCASE("line flow") {
    cfg.target_channel = "7-8";
    const ImpulseResponse r = recover(t, cfg);
    CHECK(r.relation == "angle-flow/order1");
    const auto truth = impulse_output(md, c, 1, OutputSpec::parse("line:7-8"), ResponseKind::kAngle, r.lags_s);
    CHECK(normalized_mse(truth, r) <= 0.35);
  }
}

TEST_CASE("frequency via angle-angle and freq-angle correlations agree on clean data") {
  const SignalTrace& t = ambient(false);
  RecoveryConfig cfg;
  cfg.max_lag_s = 10.0;
  cfg.subtract_reference_angle = false;
  cfg.response = ResponseKind::kFrequency;
  cfg.source_channel = "rotor_angle:2";
  cfg.target_channel = "rotor_angle:1";
  const ImpulseResponse second = recover(t, cfg);
  cfg.target_channel = "rotor_freq:1";
  const ImpulseResponse first = recover(t, cfg);
  CHECK(second.relation == "angle-angle/order2");
  CHECK(first.relation == "angle-freq/order1");
  CHECK(normalized_mse(first, second) <= 0.1);
}

TEST_CASE("scale equivariance and nadir matching") {
  const SignalTrace& t = ambient(false);
  RecoveryConfig cfg;
  cfg.source_channel = "rotor_freq:2";
  cfg.target_channel = "rotor_freq:1";
  cfg.max_lag_s = 10.0;
  cfg.scaling = Scaling::kNone;
  const ImpulseResponse raw = recover(t, cfg);

  SignalTrace scaled = t;
  const double kappa = 3.0;
  scaled.data *= kappa;
  const ImpulseResponse raw_k = recover(scaled, cfg);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(raw_k.values[i] == doctest::Approx(kappa * kappa * raw.values[i]).epsilon(1e-9).scale(1e-12));
  }

  cfg.scaling = Scaling::kNadirMatch;
  cfg.nadir_reference = 2.0 * nadir(raw).value;
  const ImpulseResponse matched = recover(t, cfg);
  CHECK(matched.scale_applied == doctest::Approx(2.0));
  CHECK(nadir(matched).value == doctest::Approx(cfg.nadir_reference));
  const ImpulseResponse matched_k = recover(scaled, cfg);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(matched_k.values[i] == doctest::Approx(matched.values[i]).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("autocorrelation peaks at zero lag after preprocessing") {
  const SignalTrace p = preprocess(ambient(true), 0.1, 0.8, true);
  for (int i = 0; i < p.n_channels(); ++i) {
    const Eigen::RowVectorXd row = p.data.row(i);
    const auto c = cross_correlate(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                   std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), 2000);
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) <= c[0]);
  }
}

TEST_CASE("an explicit differentiation order must match the channels") {
  RecoveryConfig cfg;
  cfg.source_channel = "rotor_freq:2";
  cfg.target_channel = "rotor_freq:1";
  cfg.differentiation_order = 2;
  CHECK_FALSE(error_of([&] { recover(ambient(false), cfg); }).empty());
}
