#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hybridad/jet.hpp"
#include "hybridad/tape.hpp"

namespace hybridad {

/// Square system P(x, theta) = 0. The residual tape takes [x (nx), theta
/// (ntheta)] and returns nx values.
struct ImplicitSystem {
  Tape residual;
  int nx = 0;
  int ntheta = 0;
};

using ResidualFn = std::function<std::vector<Var>(Recorder&, const std::vector<Var>& x, const std::vector<Var>& theta)>;

/// Records `residual` into a tape. Throws DimensionMismatch unless it
/// returns nx values.
ImplicitSystem make_implicit_system(int nx, int ntheta, const ResidualFn& residual);

struct NewtonResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0;  // max-norm of P at x
};

/// Undamped Newton with dense LU on the reverse-mode Jacobian. Each
/// iteration computes the step and stops without applying it once
/// |step|_inf <= tol * max(|x|_inf, 1e-300). Throws SingularJacobian,
/// MaxIterExceeded (carrying the iterate with the smallest residual).
NewtonResult newton(const ImplicitSystem& s, std::span<const double> x0, std::span<const double> theta,
                    double tol = 1e-12, int max_iter = 50);

/// dx/dtheta = -J_x^-1 J_theta at a root. Throws SingularJacobian.
Eigen::MatrixXd implicit_sensitivity(const ImplicitSystem& s, std::span<const double> root,
                                     std::span<const double> theta);

/// Scalar systems: Taylor expansion of the root along theta(e) =
/// theta_jet, one coefficient at a time from the linearized equation.
/// `root` is used as the constant term as given.
Jet implicit_jet(const ImplicitSystem& s, double root, std::span<const Jet> theta_jet);

struct NewtonJetResult {
  Jet x;
  int iterations = 0;
};

/// Scalar Newton on truncated series: x <- x - P(x, theta)/P_x(x, theta)
/// with theta a jet. After the constant term meets `tol`, ceil(log2(order +
/// 1)) more iterations run. With `fixed_iterations` >= 0 exactly that many
/// iterations run instead.
NewtonJetResult newton_jet(const ImplicitSystem& s, std::span<const Jet> theta_jet, double x0, double tol = 1e-12,
                           int fixed_iterations = -1, int max_iter = 100);

struct WarmStartReport {
  std::vector<double> theta;
  std::vector<double> root;
  /// Fraction of consecutive grid pairs with identical roots (forward
  /// difference exactly 0).
  double constant_fraction = 0;
  long total_iterations = 0;
};

/// Scalar system with scalar theta: solves along the sorted grid, each
/// solve starting from the previous root (the first from 1).
WarmStartReport warm_start_probe(const ImplicitSystem& s, std::span<const double> theta_grid, double tol);

}  // namespace hybridad
