#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridad/sim.hpp"

namespace hybridad {

/// Step eps(x) = eps_rel * max(1, |x|).
struct FdScheme {
  enum class Kind { forward, central };
  Kind kind = Kind::central;
  double eps_rel = 1e-6;
};

using VectorFn = std::function<std::vector<double>(std::span<const double>)>;

/// Jacobian of f at x, outputs x inputs. Throws Error if eps_rel <= 0.
Eigen::MatrixXd finite_difference(const VectorFn& f, std::span<const double> x, const FdScheme& scheme = {});

struct CompareReport {
  Eigen::MatrixXd abs_diff;
  /// |ad - fd| / max(|ad|, |fd|); 0 where both vanish.
  Eigen::MatrixXd rel_diff;
  double max_abs = 0, max_rel = 0;
  int abs_row = -1, abs_col = -1, rel_row = -1, rel_col = -1;
  double tol = 0;
  /// Every entry satisfies |ad - fd| <= tol * max(1, |ad|, |fd|).
  bool pass = true;

  std::string text() const;
  std::string json() const;
};

/// Throws ShapeMismatch.
CompareReport compare_report(const Eigen::MatrixXd& ad, const Eigen::MatrixXd& fd, double tol = 1e-6);

struct IdentifiabilityReport {
  /// Rows: output j at time t_k (outputs vary fastest); columns: params.
  Eigen::MatrixXd matrix;
  std::vector<double> times;
  std::vector<std::string> params;
  std::optional<double> determinant;  // square case
  double sigma_min = 0;
  double norm = 0;  // largest singular value
  /// sigma_min / norm > 1e-8. False means inconclusive, never
  /// non-identifiable.
  bool identifiable = false;

  std::string verdict() const;
  std::string text() const;
  std::string json() const;
};

/// `count` equispaced times on (0, tf].
std::vector<double> default_times(int count, double tf);

/// Sensitivity matrix of all outputs w.r.t. `params` (all parameters when
/// empty) at `times`, which must lie on the step grid of `c`. Throws
/// ShapeMismatch when there are fewer rows than parameters.
IdentifiabilityReport identifiability_test(const OdeModel& m, std::span<const double> times,
                                           const std::vector<std::string>& params = {}, SimConfig c = {});

struct SequenceProbe {
  double value_x = 0, value_n = 0;
  /// Dual-number derivative of the x component w.r.t. the initial x,
  /// propagated in extended precision and rounded once.
  double ad_derivative = 0;
  struct FdEntry {
    double eps;
    double derivative;
  };
  std::vector<FdEntry> fd;  // forward differences in double

  std::string text() const;
  std::string json() const;
};

/// f(x, n) = (10^n x, n + 1) applied 21 times from (0, -10).
SequenceProbe sequence_probe();

}  // namespace hybridad
