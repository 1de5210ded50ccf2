#pragma once

#include <string>
#include <string_view>

namespace hybridad {

/// Scalar elementary functions shared by jets, tapes, parameter
/// expressions and Fn blocks. `sign` is internal: it is what the tape
/// transforms emit as the derivative of `abs`.
struct ElementaryFn {
  enum class Kind { exp, log, sin, cos, tan, atan, sqrt, pow, abs, sign };

  Kind kind = Kind::exp;
  double exponent = 1.0;  // only meaningful for pow

  static ElementaryFn of(Kind k) { return ElementaryFn{k, 1.0}; }
  static ElementaryFn power(double p) { return ElementaryFn{Kind::pow, p}; }

  /// Accepts "exp", "sin", ..., "pow:2.5".
  static ElementaryFn parse(std::string_view name);
  std::string name() const;

  friend bool operator==(const ElementaryFn& a, const ElementaryFn& b) {
    return a.kind == b.kind && (a.kind != Kind::pow || a.exponent == b.exponent);
  }
};

/// Value and first two derivatives of an elementary function at a point.
struct FnDerivs {
  double value;
  double d1;
  double d2;
};

enum class FnStatus { ok, domain, nondifferentiable };

/// Evaluates f(u). Returns `domain` outside the real domain (log of a
/// non-positive number, sqrt of a negative number, ...).
FnStatus eval_fn(const ElementaryFn& f, double u, double& out);

/// Value plus derivatives. `nondifferentiable` for abs/sign at exactly 0
/// and for sqrt/pow where the derivative is unbounded.
FnStatus derivs_fn(const ElementaryFn& f, double u, FnDerivs& out);

}  // namespace hybridad
