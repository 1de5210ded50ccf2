#include "hybridad/jet.hpp"

#include <cmath>
#include <string>

#include "hybridad/errors.hpp"

namespace hybridad {

class JetAccess {
 public:
  static std::vector<double>& raw(Jet& j) { return j.c_; }
  static Jet sized(int order) {
    Jet j;
    j.c_.assign(static_cast<std::size_t>(order) + 1, 0.0);
    return j;
  }
};

namespace {

using Vec = std::vector<double>;

void check_finite(const Jet& j) {
  for (double c : j.coeffs())
    if (!std::isfinite(c)) throw DomainError("jet coefficient is not finite");
}

void check_order(int r) {
  if (r < 0) throw DomainError("negative jet order");
  if (r > Jet::kMaxOrder) throw OrderExceeded(r, Jet::kMaxOrder);
}

int common_order(const Jet& a, const Jet& b) {
  if (a.order() != b.order()) throw OrderMismatch(a.order(), b.order());
  return a.order();
}

Jet mul_raw(const Jet& a, const Jet& b) {
  const int r = common_order(a, b);
  Jet out = JetAccess::sized(r);
  Vec& c = JetAccess::raw(out);
  for (int k = 0; k <= r; ++k) {
    double s = 0;
    for (int j = 0; j <= k; ++j) s += a[j] * b[k - j];
    c[k] = s;
  }
  return out;
}

Jet div_raw(const Jet& a, const Jet& b) {
  const int r = common_order(a, b);
  if (b[0] == 0) throw DivisionByZeroConstantTerm();
  Jet out = JetAccess::sized(r);
  Vec& q = JetAccess::raw(out);
  for (int k = 0; k <= r; ++k) {
    double s = a[k];
    for (int j = 0; j < k; ++j) s -= q[j] * b[k - j];
    q[k] = s / b[0];
  }
  return out;
}

Jet exp_raw(const Jet& a) {
  const int r = a.order();
  Jet out = JetAccess::sized(r);
  Vec& b = JetAccess::raw(out);
  b[0] = std::exp(a[0]);
  for (int k = 1; k <= r; ++k) {
    double s = 0;
    for (int j = 1; j <= k; ++j) s += j * a[j] * b[k - j];
    b[k] = s / k;
  }
  return out;
}

Jet log_raw(const Jet& a) {
  if (!(a[0] > 0)) throw DomainError("log of a jet with non-positive constant term");
  const int r = a.order();
  Jet out = JetAccess::sized(r);
  Vec& b = JetAccess::raw(out);
  b[0] = std::log(a[0]);
  for (int k = 1; k <= r; ++k) {
    double s = 0;
    for (int j = 1; j < k; ++j) s += j * b[j] * a[k - j];
    b[k] = (a[k] - s / k) / a[0];
  }
  return out;
}

void sincos_raw(const Jet& a, Jet& sj, Jet& cj) {
  const int r = a.order();
  sj = JetAccess::sized(r);
  cj = JetAccess::sized(r);
  Vec& s = JetAccess::raw(sj);
  Vec& c = JetAccess::raw(cj);
  s[0] = std::sin(a[0]);
  c[0] = std::cos(a[0]);
  for (int k = 1; k <= r; ++k) {
    double ss = 0, cc = 0;
    for (int j = 1; j <= k; ++j) {
      ss += j * a[j] * c[k - j];
      cc += j * a[j] * s[k - j];
    }
    s[k] = ss / k;
    c[k] = -cc / k;
  }
}

Jet sqrt_raw(const Jet& a) {
  const int r = a.order();
  if (a[0] < 0 || (r > 0 && a[0] == 0))
    throw DomainError("sqrt of a jet needs a positive constant term");
  Jet out = JetAccess::sized(r);
  Vec& b = JetAccess::raw(out);
  b[0] = std::sqrt(a[0]);
  for (int k = 1; k <= r; ++k) {
    double s = a[k];
    for (int j = 1; j < k; ++j) s -= b[j] * b[k - j];
    b[k] = s / (2 * b[0]);
  }
  return out;
}

Jet atan_raw(const Jet& a) {
  const int r = a.order();
  Jet out = JetAccess::sized(r);
  Vec& b = JetAccess::raw(out);
  b[0] = std::atan(a[0]);
  if (r == 0) return out;
  // b' = a' / (1 + a^2), computed at order r-1 and integrated.
  Vec da(r), den(r), q(r);
  for (int j = 0; j < r; ++j) da[j] = (j + 1) * a[j + 1];
  for (int k = 0; k < r; ++k) {
    double s = k == 0 ? 1.0 : 0.0;
    for (int j = 0; j <= k; ++j) s += a[j] * a[k - j];
    den[k] = s;
  }
  for (int k = 0; k < r; ++k) {
    double s = da[k];
    for (int j = 0; j < k; ++j) s -= q[j] * den[k - j];
    q[k] = s / den[0];
  }
  for (int k = 1; k <= r; ++k) b[k] = q[k - 1] / k;
  return out;
}

Jet powi_raw(const Jet& a, long n) {
  Jet result = Jet::constant(1.0, a.order());
  Jet base = a;
  while (n > 0) {
    if (n & 1) result = mul_raw(result, base);
    n >>= 1;
    if (n) base = mul_raw(base, base);
  }
  return result;
}

Jet pow_raw(const Jet& a, double p) {
  const int r = a.order();
  if (p == 0) return Jet::constant(1.0, r);
  if (std::floor(p) == p && std::fabs(p) <= 1024) {
    Jet pos = powi_raw(a, static_cast<long>(std::fabs(p)));
    if (p > 0) return pos;
    if (a[0] == 0) throw DomainError("negative power of a jet with zero constant term");
    return div_raw(Jet::constant(1.0, r), pos);
  }
  if (a[0] < 0) throw DomainError("non-integer power of a jet with negative constant term");
  if (a[0] == 0) {
    if (r == 0 && p > 0) return Jet::constant(0.0, 0);
    throw DomainError("non-integer power of a jet with zero constant term");
  }
  Jet out = JetAccess::sized(r);
  Vec& b = JetAccess::raw(out);
  b[0] = std::pow(a[0], p);
  for (int k = 1; k <= r; ++k) {
    double s = 0;
    for (int j = 1; j <= k; ++j) s += ((p + 1) * j - k) * a[j] * b[k - j];
    b[k] = s / (k * a[0]);
  }
  return out;
}

Jet finite(Jet j) {
  check_finite(j);
  return j;
}

}  // namespace

Jet::Jet(std::vector<double> coeffs) : c_(std::move(coeffs)) {
  if (c_.empty()) throw DomainError("jet needs at least one coefficient");
  check_order(order());
  check_finite(*this);
}

Jet Jet::constant(double value, int order) {
  check_order(order);
  Jet j = JetAccess::sized(order);
  j.c_[0] = value;
  return finite(std::move(j));
}

Jet Jet::variable(double value, int order) {
  Jet j = constant(value, order);
  if (order >= 1) j.c_[1] = 1.0;
  return j;
}

double Jet::derivative(int i) const {
  if (i < 0 || i > order()) throw OrderExceeded(i, order());
  double f = 1;
  for (int k = 2; k <= i; ++k) f *= k;
  return f * c_[static_cast<std::size_t>(i)];
}

Jet& Jet::operator+=(const Jet& b) {
  common_order(*this, b);
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += b.c_[k];
  check_finite(*this);
  return *this;
}

Jet& Jet::operator-=(const Jet& b) {
  common_order(*this, b);
  for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= b.c_[k];
  check_finite(*this);
  return *this;
}

Jet& Jet::operator*=(const Jet& b) { return *this = finite(mul_raw(*this, b)); }
Jet& Jet::operator/=(const Jet& b) { return *this = finite(div_raw(*this, b)); }

Jet operator+(const Jet& a, const Jet& b) { return Jet(a) += b; }
Jet operator-(const Jet& a, const Jet& b) { return Jet(a) -= b; }
Jet operator*(const Jet& a, const Jet& b) { return finite(mul_raw(a, b)); }
Jet operator/(const Jet& a, const Jet& b) { return finite(div_raw(a, b)); }

Jet operator-(const Jet& a) {
  Jet out = a;
  for (double& c : JetAccess::raw(out)) c = -c;
  return out;
}

Jet operator+(const Jet& a, double b) { return a + Jet::constant(b, a.order()); }
Jet operator+(double a, const Jet& b) { return Jet::constant(a, b.order()) + b; }
Jet operator-(const Jet& a, double b) { return a - Jet::constant(b, a.order()); }
Jet operator-(double a, const Jet& b) { return Jet::constant(a, b.order()) - b; }

Jet operator*(const Jet& a, double b) {
  Jet out = a;
  for (double& c : JetAccess::raw(out)) c *= b;
  return finite(std::move(out));
}

Jet operator*(double a, const Jet& b) { return b * a; }

Jet operator/(const Jet& a, double b) {
  if (b == 0) throw DivisionByZeroConstantTerm();
  Jet out = a;
  for (double& c : JetAccess::raw(out)) c /= b;
  return finite(std::move(out));
}

Jet operator/(double a, const Jet& b) { return Jet::constant(a, b.order()) / b; }

Jet jet_apply(const ElementaryFn& f, const Jet& a) {
  using K = ElementaryFn::Kind;
  switch (f.kind) {
    case K::exp: return finite(exp_raw(a));
    case K::log: return finite(log_raw(a));
    case K::sin: {
      Jet s, c;
      sincos_raw(a, s, c);
      return finite(std::move(s));
    }
    case K::cos: {
      Jet s, c;
      sincos_raw(a, s, c);
      return finite(std::move(c));
    }
    case K::tan: {
      Jet s, c;
      sincos_raw(a, s, c);
      if (c[0] == 0) throw DomainError("tan at a pole");
      return finite(div_raw(s, c));
    }
    case K::atan: return finite(atan_raw(a));
    case K::sqrt: return finite(sqrt_raw(a));
    case K::pow: return finite(pow_raw(a, f.exponent));
    case K::abs:
      if (a[0] > 0) return a;
      if (a[0] < 0) return -a;
      if (a.order() == 0) return a;
      throw NonDifferentiablePoint(-1, "abs is not differentiable at 0");
    case K::sign:
      if (a[0] == 0) throw NonDifferentiablePoint(-1, "sign is undefined at 0");
      return Jet::constant(a[0] > 0 ? 1.0 : -1.0, a.order());
  }
  throw DomainError("unknown elementary function");
}

Jet exp(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::exp), a); }
Jet log(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::log), a); }
Jet sin(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::sin), a); }
Jet cos(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::cos), a); }
Jet tan(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::tan), a); }
Jet atan(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::atan), a); }
Jet sqrt(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::sqrt), a); }
Jet pow(const Jet& a, double p) { return jet_apply(ElementaryFn::power(p), a); }
Jet abs(const Jet& a) { return jet_apply(ElementaryFn::of(ElementaryFn::Kind::abs), a); }

}  // namespace hybridad
