#pragma once

#include <string>
#include <vector>

#include "hybridad/diagram.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

struct OptimizeOptions {
  enum class Jacobian { ad, fd };
  Jacobian jacobian = Jacobian::ad;
  double theta0 = 0.1;
  /// theta is clamped to [lo, hi] before every evaluation.
  double lo = 0.001, hi = 3;
  /// Sample interval of the cost integrand (zero-order hold); 0 disables.
  double decimate = 0;
  /// Converged when |step| <= tol * max(1, |theta|).
  double tol = 1e-10;
  int max_iter = 50;
  /// Largest Newton step.
  double max_step = 0.5;
  /// FD route: central three-point stencil on J with eps = fd_eps_rel *
  /// max(1, |theta|).
  double fd_eps_rel = 1e-4;
  SimConfig sim;
};

struct OptimizeIterate {
  double theta;
  double J;
  double G;  // dJ/dtheta
  double H;  // d2J/dtheta2
};

struct OptimizeResult {
  double theta = 0;
  double J = 0;
  double G = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<OptimizeIterate> history;
};

/// Name of the accumulated cost output added by cost_diagram.
inline constexpr const char* kCostOutput = "J";

/// `d` plus an integrator accumulating output `integrand` (through a
/// zero-order hold when decimate > 0), exposed as output "J". Throws
/// ValidationError if `integrand` is not an output.
Diagram cost_diagram(const Diagram& d, const std::string& integrand, double decimate = 0);

/// Damped Newton on dJ/dtheta = 0 for J = integral of `integrand` over
/// [t0, tf]. The AD route differentiates the cost diagram twice by AGDM;
/// the FD route differences simulated J. Stops at the first iterate whose
/// step is below tol, or with converged = false after max_iter.
OptimizeResult optimize(const Diagram& d, const std::string& theta, const std::string& integrand,
                        const OptimizeOptions& o = {});

}  // namespace hybridad
