#include "dynresp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dynresp/error.hpp"
#include "text_util.hpp"

namespace dynresp {

using detail::format_double;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_grid(std::span<const double> a, std::span<const double> b) {
  if (a.size() > b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i]))) return false;
  }
  return true;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Parabola through (-1, a), (0, b), (1, c): vertex offset and value.
std::pair<double, double> parabola_vertex(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom == 0.0) return {0.0, b};
  const double off = 0.5 * (a - c) / denom;
  return {off, b - 0.25 * (a - c) * off};
}

// Prominence of the local maximum at i, following the usual definition:
// height above the higher of the two minima reached before the signal
// climbs above y[i] on either side.
double prominence(std::span<const double> y, std::size_t i) {
  double left_min = y[i];
  for (std::size_t j = i; j-- > 0;) {
    if (y[j] > y[i]) break;
    left_min = std::min(left_min, y[j]);
  }
  double right_min = y[i];
  for (std::size_t j = i + 1; j < y.size(); ++j) {
    if (y[j] > y[i]) break;
    right_min = std::min(right_min, y[j]);
  }
  return y[i] - std::max(left_min, right_min);
}

std::vector<std::size_t> find_peaks(std::span<const double> y, double min_prominence) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] > y[i - 1] && y[i] > y[i + 1] && prominence(y, i) >= min_prominence) out.push_back(i);
  }
  return out;
}

double ls_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) fail(ErrorCode::kNumeric, "degenerate regression: all abscissae equal");
  return sxy / sxx;
}

}  // namespace

std::vector<double> resample_linear(const ImpulseResponse& r, std::span<const double> lags) {
  require(!r.values.empty() && r.lags_s.size() == r.values.size(), "response is empty or malformed");
  std::vector<double> out(lags.size());
  const auto& t = r.lags_s;
  const double tol = 1e-9 * std::max(1.0, std::abs(t.back()));
  for (std::size_t i = 0; i < lags.size(); ++i) {
    const double q = lags[i];
    require(q >= t.front() - tol && q <= t.back() + tol,
            "lag " + format_double(q) + " outside the response range");
    auto it = std::upper_bound(t.begin(), t.end(), q);
    if (it == t.begin()) {
      out[i] = r.values.front();
      continue;
    }
    if (it == t.end()) {
      out[i] = r.values.back();
      continue;
    }
    const auto hi = static_cast<std::size_t>(it - t.begin());
    const std::size_t lo = hi - 1;
    const double w = (q - t[lo]) / (t[hi] - t[lo]);
    out[i] = (1.0 - w) * r.values[lo] + w * r.values[hi];
  }
  return out;
}

double normalized_mse(std::span<const double> truth, std::span<const double> est) {
  require(truth.size() == est.size(), "curves differ in length");
  require(!truth.empty(), "curves are empty");
  const double mt = max_abs(truth);
  if (mt == 0.0) fail(ErrorCode::kInvalidArgument, "truth curve is identically zero");
  const double me = max_abs(est);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double tn = truth[i] / mt;
    const double en = me == 0.0 ? 0.0 : est[i] / me;
    num += (tn - en) * (tn - en);
    den += tn * tn;
  }
  return std::sqrt(num / den);
}

double normalized_mse(const ImpulseResponse& truth, const ImpulseResponse& est) {
  require(truth.lags_s.size() == truth.values.size() && est.lags_s.size() == est.values.size(),
          "response lag and value counts differ");
  require(!est.values.empty(), "estimate is empty");
  if (same_grid(truth.lags_s, est.lags_s)) {
    return normalized_mse(truth.values,
                          std::span<const double>(est.values.data(), truth.values.size()));
  }
  std::size_t keep = 0;
  const double end = est.lags_s.back() * (1.0 + 1e-12) + 1e-12;
  while (keep < truth.lags_s.size() && truth.lags_s[keep] <= end) ++keep;
  require(keep > 0, "estimate does not overlap the truth lag grid");
  const std::span<const double> lags(truth.lags_s.data(), keep);
  const std::vector<double> e = resample_linear(est, lags);
  return normalized_mse(std::span<const double>(truth.values.data(), keep), e);
}

Nadir nadir(const ImpulseResponse& r) {
  require(!r.values.empty() && r.lags_s.size() == r.values.size(), "nadir of an empty curve");
  const std::size_t n = r.values.size();
  std::size_t first = 0;
  while (first < n && r.lags_s[first] <= 0.0) ++first;
  if (first == n) first = n - 1;
  std::size_t best = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (r.values[i] < r.values[best]) best = i;
  }
  Nadir out{r.lags_s[best], r.values[best], false};
  if (best > 0 && best + 1 < n && r.values[best - 1] >= r.values[best]) {
    const auto [off, val] = parabola_vertex(r.values[best - 1], r.values[best], r.values[best + 1]);
    const double step = 0.5 * (r.lags_s[best + 1] - r.lags_s[best - 1]);
    out.time_s = r.lags_s[best] + std::clamp(off, -0.5, 0.5) * step;
    out.value = std::min(val, r.values[best]);
    out.interior = true;
  }
  return out;
}

double propagation_speed(std::span<const double> lags_s, std::span<const double> distances_miles) {
  require(lags_s.size() == distances_miles.size(), "lag and distance counts differ");
  require(lags_s.size() >= 2, "propagation speed needs at least two targets");
  const auto [lmin, lmax] = std::minmax_element(lags_s.begin(), lags_s.end());
  const auto [dmin, dmax] = std::minmax_element(distances_miles.begin(), distances_miles.end());
  if (*lmin == *lmax || *dmin == *dmax) {
    fail(ErrorCode::kInvalidArgument, "degenerate propagation data: lags or distances all equal");
  }
  return ls_slope(lags_s, distances_miles);
}

ModeEstimate log_decrement(std::span<const double> values, double step) {
  require(step > 0.0, "sample step must be positive");
  const std::size_t n = values.size();
  if (n < 5) fail(ErrorCode::kNumeric, "insufficient cycles: curve too short");
  std::vector<double> idx(n), y(values.begin(), values.end());
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<double>(i);
  const double slope = ls_slope(idx, y);
  double my = 0.0;
  for (double v : y) my += v;
  my /= static_cast<double>(n);
  const double mx = 0.5 * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) y[i] -= my + slope * (idx[i] - mx);

  const double min_prom = 0.01 * max_abs(y);
  const std::vector<std::size_t> peaks = find_peaks(y, min_prom);
  std::vector<double> neg(n);
  for (std::size_t i = 0; i < n; ++i) neg[i] = -y[i];
  const std::vector<std::size_t> troughs = find_peaks(neg, min_prom);
  if (peaks.size() < 3) fail(ErrorCode::kNumeric, "insufficient cycles: fewer than 3 peaks");

  auto refined_time = [&](std::size_t i) {
    return (static_cast<double>(i) + parabola_vertex(y[i - 1], y[i], y[i + 1]).first) * step;
  };
  ModeEstimate est;
  est.n_peaks = static_cast<int>(peaks.size());
  est.osc_freq_hz = static_cast<double>(peaks.size() - 1) /
                    (refined_time(peaks.back()) - refined_time(peaks.front()));

  std::vector<double> cycle, neg_log_amp;
  for (std::size_t p : peaks) {
    auto after = std::upper_bound(troughs.begin(), troughs.end(), p);
    if (after == troughs.begin() || after == troughs.end()) continue;
    const double amp = y[p] - 0.5 * (y[*(after - 1)] + y[*after]);
    if (amp <= 0.0) continue;
    cycle.push_back(static_cast<double>(cycle.size()));
    neg_log_amp.push_back(-std::log(amp));
  }
  if (cycle.size() < 2) fail(ErrorCode::kNumeric, "insufficient cycles: fewer than 2 full swings");
  est.damping = ls_slope(cycle, neg_log_amp);
  return est;
}

ModeEstimate log_decrement(const ImpulseResponse& r) {
  require(r.lags_s.size() == r.values.size(), "response lag and value counts differ");
  return log_decrement(r.values, r.lag_step());
}

RecoveryReport make_report(const ImpulseResponse& est, const ImpulseResponse* truth) {
  RecoveryReport rep;
  rep.source = est.source;
  rep.target = est.target;
  rep.kind = est.kind;
  rep.relation = est.relation;
  rep.scale_applied = est.scale_applied;
  rep.normalized_mse = truth != nullptr ? normalized_mse(*truth, est) : kNaN;
  const Nadir nd = nadir(est);
  rep.nadir_time_s = nd.time_s;
  rep.nadir_value = nd.value;
  rep.nadir_interior = nd.interior;
  try {
    const ModeEstimate m = log_decrement(est);
    rep.est_osc_freq_hz = m.osc_freq_hz;
    rep.est_damping = m.damping;
  } catch (const Error&) {
    rep.est_osc_freq_hz = kNaN;
    rep.est_damping = kNaN;
  }
  return rep;
}

std::string format_report_csv(const std::vector<RecoveryReport>& reports) {
  std::string out =
      "source,target,kind,relation,normalized_mse,nadir_time_s,nadir_value,nadir_interior,"
      "est_osc_freq_hz,est_damping,scale_applied\n";
  for (const auto& r : reports) {
    out += r.source + ',' + r.target + ',' + r.kind + ',' + r.relation + ',' +
           format_double(r.normalized_mse) + ',' + format_double(r.nadir_time_s) + ',' +
           format_double(r.nadir_value) + ',' + (r.nadir_interior ? "true" : "false") + ',' +
           format_double(r.est_osc_freq_hz) + ',' + format_double(r.est_damping) + ',' +
           format_double(r.scale_applied) + '\n';
  }
  return out;
}

std::string format_report_table(const std::vector<RecoveryReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-7s %-15s %-20s %8s %9s %9s %8s\n", "source", "target",
                "kind", "relation", "nmse", "nadir_s", "freq_hz", "logdec");
  out += line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-6s %-7s %-15s %-20s %8.4f %9.3f %9.4f %8.4f%s\n",
                  r.source.c_str(), r.target.c_str(), r.kind.c_str(), r.relation.c_str(),
                  r.normalized_mse, r.nadir_time_s, r.est_osc_freq_hz, r.est_damping,
                  r.nadir_interior ? "" : "  (no interior nadir)");
    out += line;
  }
  return out;
}

}  // namespace dynresp
