#include "dynresp/modal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynresp/error.hpp"

namespace dynresp {

std::vector<double> uniform_lags(double step, std::size_t count) {
  std::vector<double> lags(count);
  for (std::size_t i = 0; i < count; ++i) lags[i] = static_cast<double>(i) * step;
  return lags;
}

ModeConstants mode_constants(double gamma, double lambda) {
  require(gamma > 0.0, "gamma must be positive");
  require(lambda >= 0.0, "lambda must be nonnegative");
  const double disc = gamma * gamma - 4.0 * lambda;
  if (disc == 0.0) fail(ErrorCode::kNumeric, "degenerate mode: critical damping (gamma^2 == 4 lambda)");
  const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
  ModeConstants m;
  m.c = 0.5 * (-gamma + root);
  m.d = 0.5 * (-gamma - root);
  m.eta = 1.0 / root;
  return m;
}

bool ModalDecomposition::has_zero_mode(double tol) const {
  return lambdas.size() > 0 && lambdas.minCoeff() <= tol;
}

ModalDecomposition decompose(const GridCase& c, double gamma, double alpha) {
  require(gamma > 0.0, "gamma must be positive");
  require(alpha > 0.0, "alpha must be positive");
  const Eigen::MatrixXd& K = c.jacobian;
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    fail(ErrorCode::kNumeric, "modal analysis requires a symmetric jacobian");
  }

  const Eigen::VectorXd inv_sqrt_m = c.inertia.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd whitened = inv_sqrt_m.asDiagonal() * K * inv_sqrt_m.asDiagonal();
  whitened = 0.5 * (whitened + whitened.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(whitened);
  if (es.info() != Eigen::Success) fail(ErrorCode::kNumeric, "eigen-decomposition did not converge");

  const int n = c.n_machines();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&ev](int a, int b) { return ev(a) < ev(b); });

  ModalDecomposition md;
  md.gamma = gamma;
  md.alpha = alpha;
  md.inertia = c.inertia;
  md.lambdas.resize(n);
  md.V.resize(n, n);
  const double clamp = kEigenClampTol * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int j = 0; j < n; ++j) {
    double lam = ev(order[j]);
    if (lam < -clamp) fail(ErrorCode::kNumeric, "jacobian is not positive semidefinite");
    if (std::abs(lam) <= clamp) lam = 0.0;
    md.lambdas(j) = lam;
    md.V.col(j) = inv_sqrt_m.asDiagonal() * es.eigenvectors().col(order[j]);
  }
  md.modes.reserve(n);
  for (int j = 0; j < n; ++j) md.modes.push_back(mode_constants(gamma, md.lambdas(j)));
  return md;
}

namespace {

void check_index(const ModalDecomposition& md, int idx, const char* what) {
  require(idx >= 0 && idx < md.n(), std::string(what) + " index " + std::to_string(idx + 1) +
                                        " out of range (1.." + std::to_string(md.n()) + ")");
}

// Evaluates sum_i w_i * term(mode_i, tau) and asserts the result is real.
template <class Term>
std::vector<double> modal_sum(const ModalDecomposition& md, const Eigen::VectorXd& weights,
                              std::span<const double> taus, Term term) {
  std::vector<double> out(taus.size());
  double max_re = 0.0, max_im = 0.0, term_scale = 0.0;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < md.n(); ++i) {
      if (weights(i) == 0.0) continue;
      const std::complex<double> v = weights(i) * term(md.modes[i], taus[t]);
      term_scale = std::max(term_scale, std::abs(v));
      acc += v;
    }
    out[t] = acc.real();
    max_re = std::max(max_re, std::abs(acc.real()));
    max_im = std::max(max_im, std::abs(acc.imag()));
  }
  if (max_im > kImagTol * std::max(max_re, term_scale)) {
    fail(ErrorCode::kNumeric, "modal sum has a non-negligible imaginary residue");
  }
  return out;
}

Eigen::VectorXd pair_weights(const ModalDecomposition& md, int k, const Eigen::VectorXd& row) {
  // w_i = V_ki * (row . V_:i)
  return md.V.row(k).transpose().cwiseProduct(md.V.transpose() * row);
}

void check_taus(std::span<const double> taus) {
  for (double t : taus) require(t >= 0.0, "lag values must be nonnegative");
}

auto frequency_term = [](const ModeConstants& m, double tau) {
  return m.eta * (m.c * std::exp(m.c * tau) - m.d * std::exp(m.d * tau));
};

auto angle_term = [](const ModeConstants& m, double tau) {
  return m.eta * (std::exp(m.c * tau) - std::exp(m.d * tau));
};

ImpulseResponse make_response(std::span<const double> taus, std::vector<double> values, int k,
                              std::string target, std::string kind) {
  ImpulseResponse r;
  r.lags_s.assign(taus.begin(), taus.end());
  r.values = std::move(values);
  r.source = std::to_string(k + 1);
  r.target = std::move(target);
  r.kind = std::move(kind);
  return r;
}

}  // namespace

ImpulseResponse impulse_frequency(const ModalDecomposition& md, int k, int l,
                                  std::span<const double> taus) {
  check_index(md, k, "source");
  check_index(md, l, "target");
  check_taus(taus);
  const Eigen::VectorXd w = pair_weights(md, k, Eigen::VectorXd::Unit(md.n(), l));
  return make_response(taus, modal_sum(md, w, taus, frequency_term), k, std::to_string(l + 1),
                       "frequency");
}

ImpulseResponse impulse_angle(const ModalDecomposition& md, int k, int l,
                              std::span<const double> taus) {
  check_index(md, k, "source");
  check_index(md, l, "target");
  check_taus(taus);
  const Eigen::VectorXd w = pair_weights(md, k, Eigen::VectorXd::Unit(md.n(), l));
  return make_response(taus, modal_sum(md, w, taus, angle_term), k, std::to_string(l + 1), "angle");
}

ImpulseResponse impulse_output(const ModalDecomposition& md, const GridCase& c, int k,
                               const OutputSpec& target, ResponseKind kind,
                               std::span<const double> taus) {
  check_index(md, k, "source");
  check_taus(taus);
  require(c.n_machines() == md.n(), "case and decomposition sizes differ");
  const Eigen::MatrixXd row = output_matrix(c, {target});
  const Eigen::VectorXd w = pair_weights(md, k, row.row(0).transpose());
  const bool line = target.kind == OutputKind::kLineFlow;
  if (kind == ResponseKind::kFrequency) {
    return make_response(taus, modal_sum(md, w, taus, frequency_term), k, target.location(),
                         line ? "line_flow_rate" : "bus_frequency");
  }
  return make_response(taus, modal_sum(md, w, taus, angle_term), k, target.location(),
                       line ? "line_flow" : "bus_angle");
}

std::vector<double> analytic_crosscorr_angle(const ModalDecomposition& md, int k, int l,
                                             std::span<const double> taus, int derivative_order) {
  check_index(md, k, "source");
  check_index(md, l, "target");
  check_taus(taus);
  require(derivative_order >= 0, "derivative order must be nonnegative");
  if (md.has_zero_mode()) {
    fail(ErrorCode::kNumeric,
         "analytic angle cross-correlation undefined with a zero mode (non-stationary angles)");
  }
  const double gamma = md.gamma;
  const Eigen::VectorXd w = pair_weights(md, k, Eigen::VectorXd::Unit(md.n(), l));
  auto term = [gamma, derivative_order](const ModeConstants& m, double tau) {
    const std::complex<double> cn = std::pow(m.c, derivative_order);
    const std::complex<double> dn = std::pow(m.d, derivative_order);
    return m.eta * m.eta *
           ((1.0 / (2.0 * m.c) + 1.0 / gamma) * cn * std::exp(m.c * tau) +
            (1.0 / (2.0 * m.d) + 1.0 / gamma) * dn * std::exp(m.d * tau));
  };
  std::vector<double> out = modal_sum(md, w, taus, term);
  for (double& v : out) v *= -md.alpha;
  return out;
}

}  // namespace dynresp
