#include "hybridad/elementary.hpp"

#include <charconv>
#include <cmath>

#include "hybridad/errors.hpp"

namespace hybridad {

namespace {

bool is_integer(double p) { return std::isfinite(p) && std::floor(p) == p; }

}  // namespace

ElementaryFn ElementaryFn::parse(std::string_view name) {
  using K = Kind;
  if (name == "exp") return of(K::exp);
  if (name == "log") return of(K::log);
  if (name == "sin") return of(K::sin);
  if (name == "cos") return of(K::cos);
  if (name == "tan") return of(K::tan);
  if (name == "atan") return of(K::atan);
  if (name == "sqrt") return of(K::sqrt);
  if (name == "abs") return of(K::abs);
  if (name == "sign") return of(K::sign);
  if (name.rfind("pow:", 0) == 0) {
    std::string_view rest = name.substr(4);
    double p = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), p);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || !std::isfinite(p))
      throw DomainError("bad pow exponent in '" + std::string(name) + "'");
    return power(p);
  }
  throw DomainError("unknown elementary function '" + std::string(name) + "'");
}

std::string ElementaryFn::name() const {
  switch (kind) {
    case Kind::exp: return "exp";
    case Kind::log: return "log";
    case Kind::sin: return "sin";
    case Kind::cos: return "cos";
    case Kind::tan: return "tan";
    case Kind::atan: return "atan";
    case Kind::sqrt: return "sqrt";
    case Kind::abs: return "abs";
    case Kind::sign: return "sign";
    case Kind::pow: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, exponent);
      return "pow:" + std::string(buf, res.ptr);
    }
  }
  return "?";
}

FnStatus eval_fn(const ElementaryFn& f, double u, double& out) {
  using K = ElementaryFn::Kind;
  switch (f.kind) {
    case K::exp: out = std::exp(u); break;
    case K::log:
      if (!(u > 0)) return FnStatus::domain;
      out = std::log(u);
      break;
    case K::sin: out = std::sin(u); break;
    case K::cos: out = std::cos(u); break;
    case K::tan: out = std::tan(u); break;
    case K::atan: out = std::atan(u); break;
    case K::sqrt:
      if (!(u >= 0)) return FnStatus::domain;
      out = std::sqrt(u);
      break;
    case K::abs: out = std::fabs(u); break;
    case K::sign:
      if (u == 0) return FnStatus::nondifferentiable;
      out = u > 0 ? 1.0 : -1.0;
      break;
    case K::pow: {
      const double p = f.exponent;
      if (u < 0 && !is_integer(p)) return FnStatus::domain;
      if (u == 0 && p < 0) return FnStatus::domain;
      out = std::pow(u, p);
      break;
    }
  }
  return std::isfinite(out) ? FnStatus::ok : FnStatus::domain;
}

FnStatus derivs_fn(const ElementaryFn& f, double u, FnDerivs& d) {
  using K = ElementaryFn::Kind;
  FnStatus st = eval_fn(f, u, d.value);
  if (st != FnStatus::ok) return st;
  switch (f.kind) {
    case K::exp: d.d1 = d.d2 = d.value; break;
    case K::log:
      d.d1 = 1.0 / u;
      d.d2 = -1.0 / (u * u);
      break;
    case K::sin:
      d.d1 = std::cos(u);
      d.d2 = -d.value;
      break;
    case K::cos:
      d.d1 = -std::sin(u);
      d.d2 = -d.value;
      break;
    case K::tan:
      d.d1 = 1.0 + d.value * d.value;
      d.d2 = 2.0 * d.value * d.d1;
      break;
    case K::atan: {
      const double q = 1.0 / (1.0 + u * u);
      d.d1 = q;
      d.d2 = -2.0 * u * q * q;
      break;
    }
    case K::sqrt:
      if (!(u > 0)) return FnStatus::nondifferentiable;
      d.d1 = 0.5 / d.value;
      d.d2 = -0.25 / (d.value * u);
      break;
    case K::abs:
      if (u == 0) return FnStatus::nondifferentiable;
      d.d1 = u > 0 ? 1.0 : -1.0;
      d.d2 = 0.0;
      break;
    case K::sign: d.d1 = d.d2 = 0.0; break;
    case K::pow: {
      const double p = f.exponent;
      if (p == 0) {
        d.d1 = d.d2 = 0.0;
      } else if (u == 0) {
        if (p < 1 || (p < 2 && p != 1)) return FnStatus::nondifferentiable;
        d.d1 = p == 1 ? 1.0 : 0.0;
        d.d2 = p == 2 ? 2.0 : 0.0;
      } else {
        d.d1 = p * std::pow(u, p - 1);
        d.d2 = p * (p - 1) * std::pow(u, p - 2);
      }
      break;
    }
  }
  return FnStatus::ok;
}

}  // namespace hybridad
