#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynresp/grid_model.hpp"
#include "dynresp/response.hpp"

namespace dynresp {

/// Per-mode constants of z'' + gamma z' + lambda z = input:
/// c, d are the two characteristic roots and eta = 1/(c - d).
struct ModeConstants {
  std::complex<double> c;
  std::complex<double> d;
  std::complex<double> eta;
};

/// Principal square root with nonnegative imaginary part. Throws for the
/// critically damped case gamma^2 == 4 lambda.
ModeConstants mode_constants(double gamma, double lambda);

/// Eigen-decomposition of the undamped pencil (K, M) with uniform damping.
///
/// Columns of `V` are M-orthonormal (V^T M V = I, V^T K V = diag(lambdas)),
/// eigenvalues are ascending with ties broken by index, and eigenvalues
/// above -1e-10 but below zero are clamped to zero.
struct ModalDecomposition {
  Eigen::MatrixXd V;
  Eigen::VectorXd lambdas;
  Eigen::VectorXd inertia;  // diagonal of M, kept for checks
  double gamma = 0.0;
  double alpha = 0.0;
  std::vector<ModeConstants> modes;

  int n() const { return static_cast<int>(lambdas.size()); }
  bool has_zero_mode(double tol = 1e-10) const;
};

inline constexpr double kEigenClampTol = 1e-10;

/// Requires a symmetric K (within kSymmetryTol) and gamma, alpha > 0.
/// The damping stored in `c` is not consulted; gamma is the assumed
/// uniform damping ratio D = gamma M.
ModalDecomposition decompose(const GridCase& c, double gamma, double alpha);

/// T_{u_k, omega_l}(tau) = sum_i V_ki V_li eta_i (c_i e^{c_i tau} - d_i e^{d_i tau})
ImpulseResponse impulse_frequency(const ModalDecomposition& md, int k, int l,
                                  std::span<const double> taus);

/// T_{u_k, delta_l}(tau) = sum_i V_ki V_li eta_i (e^{c_i tau} - e^{d_i tau})
ImpulseResponse impulse_angle(const ModalDecomposition& md, int k, int l,
                              std::span<const double> taus);

enum class ResponseKind { kFrequency, kAngle };

/// Output-mapped response of a bus angle or line flow. With kFrequency the
/// result is the response of the output's time derivative (e.g. bus frequency).
ImpulseResponse impulse_output(const ModalDecomposition& md, const GridCase& c, int k,
                               const OutputSpec& target, ResponseKind kind,
                               std::span<const double> taus);

/// Closed-form ambient angle cross-correlation E[delta_k(t) delta_l(t - tau)]
/// for tau >= 0, or its `derivative_order`-th tau-derivative.
/// Requires every lambda_i > 0 (the zero mode has no stationary correlation).
std::vector<double> analytic_crosscorr_angle(const ModalDecomposition& md, int k, int l,
                                             std::span<const double> taus,
                                             int derivative_order = 0);

/// Realness check applied to every complex modal sum.
inline constexpr double kImagTol = 1e-9;

}  // namespace dynresp
