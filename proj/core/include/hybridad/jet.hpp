#pragma once

#include <span>
#include <vector>

#include "hybridad/elementary.hpp"

namespace hybridad {

/// Truncated Taylor series c0 + c1 e + ... + cr e^r in one variable.
/// All arithmetic is exact on the truncated polynomial ring; coefficients
/// beyond `order()` are dropped.
class Jet {
 public:
  static constexpr int kMaxOrder = 64;

  Jet() : c_(1, 0.0) {}
  /// Throws DomainError on an empty, oversized or non-finite coefficient list.
  explicit Jet(std::vector<double> coeffs);

  static Jet constant(double value, int order);
  /// [v, 1, 0, ...]
  static Jet variable(double value, int order);

  int order() const { return static_cast<int>(c_.size()) - 1; }
  double value() const { return c_[0]; }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  std::span<const double> coeffs() const { return c_; }

  /// i! * c_i, the i-th derivative with respect to the jet variable.
  double derivative(int i) const;

  Jet& operator+=(const Jet& b);
  Jet& operator-=(const Jet& b);
  Jet& operator*=(const Jet& b);
  Jet& operator/=(const Jet& b);

 private:
  friend class JetAccess;
  std::vector<double> c_;
};

inline Jet jet_var(double v, int order) { return Jet::variable(v, order); }
inline Jet jet_const(double v, int order) { return Jet::constant(v, order); }
inline double jet_derivative(const Jet& a, int i) { return a.derivative(i); }

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
/// Throws DivisionByZeroConstantTerm when b0 == 0.
Jet operator/(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);

Jet operator+(const Jet& a, double b);
Jet operator+(double a, const Jet& b);
Jet operator-(const Jet& a, double b);
Jet operator-(double a, const Jet& b);
Jet operator*(const Jet& a, double b);
Jet operator*(double a, const Jet& b);
Jet operator/(const Jet& a, double b);
Jet operator/(double a, const Jet& b);

/// Composes an elementary function with a jet using the standard
/// coefficient recurrences. Throws DomainError outside the domain and
/// NonDifferentiablePoint for abs/sign at 0 when order >= 1.
Jet jet_apply(const ElementaryFn& f, const Jet& a);

Jet exp(const Jet& a);
Jet log(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet tan(const Jet& a);
Jet atan(const Jet& a);
Jet sqrt(const Jet& a);
Jet pow(const Jet& a, double p);
Jet abs(const Jet& a);

}  // namespace hybridad
