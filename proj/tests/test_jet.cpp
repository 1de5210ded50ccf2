#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "hybridad/errors.hpp"
#include "hybridad/jet.hpp"

using namespace hybridad;

namespace {

using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b, int r) {
  Poly c(static_cast<std::size_t>(r + 1), 0.0);
  for (int i = 0; i <= r; ++i)
    for (int j = 0; i + j <= r; ++j) c[i + j] += a[i] * b[j];
  return c;
}

double falling(double p, int k) {
  double f = 1;
  for (int i = 0; i < k; ++i) f *= p - i;
  return f;
}

// k-th derivative of f at x0, from closed forms independent of the jet code.
double nth_derivative(ElementaryFn f, double x0, int k) {
  using K = ElementaryFn::Kind;
  switch (f.kind) {
    case K::exp: return std::exp(x0);
    case K::log:
      if (k == 0) return std::log(x0);
      return ((k - 1) % 2 ? -1.0 : 1.0) * std::tgamma(k) / std::pow(x0, k);
    case K::sin: return std::sin(x0 + k * M_PI / 2);
    case K::cos: return std::cos(x0 + k * M_PI / 2);
    case K::sqrt: return falling(0.5, k) * std::pow(x0, 0.5 - k);
    case K::pow: return falling(f.exponent, k) * std::pow(x0, f.exponent - k);
    case K::atan: {
      if (k == 0) return std::atan(x0);
      std::complex<double> z(x0, -1.0);
      return ((k - 1) % 2 ? -1.0 : 1.0) * std::tgamma(k) * std::imag(std::pow(z, -k));
    }
    case K::tan: {
      // d/dx P(tan) = P'(tan) (1 + tan^2), starting from P(t) = t.
      Poly p{0, 1};
      for (int i = 0; i < k; ++i) {
        Poly dp(p.size() + 1, 0.0);
        for (std::size_t j = 1; j < p.size(); ++j) {
          dp[j - 1] += j * p[j];
          dp[j + 1] += j * p[j];
        }
        p = dp;
      }
      const double t = std::tan(x0);
      double s = 0, tp = 1;
      for (double c : p) {
        s += c * tp;
        tp *= t;
      }
      return s;
    }
    default: return NAN;
  }
}

// f(a(e)) by expanding sum f^(k)(a0)/k! (a - a0)^k and truncating.
Poly compose_oracle(ElementaryFn f, const Poly& a, int r) {
  Poly delta = a;
  delta[0] = 0;
  Poly out(static_cast<std::size_t>(r + 1), 0.0);
  Poly power(static_cast<std::size_t>(r + 1), 0.0);
  power[0] = 1;
  double fact = 1;
  for (int k = 0; k <= r; ++k) {
    if (k > 0) {
      power = poly_mul(power, delta, r);
      fact *= k;
    }
    const double coef = nth_derivative(f, a[0], k) / fact;
    for (int i = 0; i <= r; ++i) out[i] += coef * power[i];
  }
  return out;
}

void expect_coeffs(const Jet& j, const std::vector<double>& want, double tol) {
  ASSERT_EQ(j.order() + 1, static_cast<int>(want.size()));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(j[static_cast<int>(i)], want[i], tol) << "coefficient " << i;
}

Jet random_jet(std::mt19937_64& rng, int r, double c0_lo = -2, double c0_hi = 2) {
  std::uniform_real_distribution<double> c0(c0_lo, c0_hi), ci(-1, 1);
  std::vector<double> c(static_cast<std::size_t>(r + 1));
  c[0] = c0(rng);
  for (int i = 1; i <= r; ++i) c[i] = ci(rng);
  return Jet(c);
}

}  // namespace

TEST(Jet, VariableConstruction) {
  expect_coeffs(jet_var(2.0, 3), {2, 1, 0, 0}, 0);
  expect_coeffs(jet_var(0.0, 0), {0}, 0);
  Jet j = jet_var(1.5, 19);
  EXPECT_EQ(j.order(), 19);
  EXPECT_EQ(j[0], 1.5);
  EXPECT_EQ(j[1], 1.0);
  for (int i = 2; i <= 19; ++i) EXPECT_EQ(j[i], 0.0);
}

TEST(Jet, Arithmetic) {
  expect_coeffs(Jet({1, 1, 0}) * Jet({1, -1, 0}), {1, 0, -1}, 0);
  expect_coeffs(Jet({1, 0, 0}) / Jet({1, 1, 0}), {1, -1, 1}, 0);
  expect_coeffs(jet_var(3, 2) * jet_var(3, 2), {9, 6, 1}, 0);
  EXPECT_THROW(Jet({1, 0}) / Jet({0, 1}), DivisionByZeroConstantTerm);
  EXPECT_THROW(Jet({1, 0}) + Jet({1, 0, 0}), OrderMismatch);
}

TEST(Jet, ProductRuleAgainstExpandAndTruncate) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 6;
    Jet a = random_jet(rng, r), b = random_jet(rng, r);
    Poly pa(a.coeffs().begin(), a.coeffs().end()), pb(b.coeffs().begin(), b.coeffs().end());
    Poly want = poly_mul(pa, pb, r);
    Jet got = a * b;
    for (int i = 0; i <= r; ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
  }
}

TEST(Jet, ElementaryExamples) {
  expect_coeffs(exp(Jet({0, 1, 0, 0})), {1, 1, 0.5, 1.0 / 6}, 1e-16);
  expect_coeffs(sin(Jet({0, 1, 0, 0})), {0, 1, 0, -1.0 / 6}, 1e-16);
  EXPECT_THROW(sqrt(Jet({-1, 1})), DomainError);
  EXPECT_THROW(sqrt(Jet({0, 1})), DomainError);
  EXPECT_THROW(log(Jet({0, 1})), DomainError);
  EXPECT_THROW(abs(Jet({0, 1})), NonDifferentiablePoint);
  expect_coeffs(abs(Jet({-2, 1})), {2, -1}, 0);
}

TEST(Jet, SqrtNineteenthDerivative) {
  const double exact = falling(0.5, 19) * std::pow(2.0, 0.5 - 19);
  const double got = sqrt(jet_var(2.0, 19)).derivative(19);
  EXPECT_NEAR(got, exact, 1e-12 * std::fabs(exact));
  // Published rounding of the same value; agrees to about 1e-8 relative.
  EXPECT_NEAR(got, 1.140326912e9, 2e-8 * 1.14e9);
}

TEST(Jet, DerivativeExtraction) {
  EXPECT_DOUBLE_EQ(Jet({1, 1, 0.5, 1.0 / 6}).derivative(2), 1.0);
  EXPECT_EQ(Jet({5, 0, 0}).derivative(0), 5.0);
  Jet inv = 1.0 / (1.0 + jet_var(0.0, 11));
  EXPECT_DOUBLE_EQ(inv.derivative(5), -120.0);
  double fact = 1;
  for (int i = 0; i <= 11; ++i) {
    if (i) fact *= i;
    EXPECT_DOUBLE_EQ(inv.derivative(i), (i % 2 ? -1 : 1) * fact);
  }
  EXPECT_THROW(jet_var(0, 3).derivative(4), OrderExceeded);
  for (int r = 1; r <= 64; r += 7)
    for (double v : {-3.0, 0.0, 1e10}) EXPECT_EQ(jet_var(v, r).derivative(1), 1.0);
}

TEST(Jet, OrderCap) {
  EXPECT_NO_THROW(jet_var(0, 64));
  EXPECT_THROW(jet_var(0, 65), OrderExceeded);
  EXPECT_THROW(Jet(std::vector<double>(66, 0.0)), OrderExceeded);
}

TEST(Jet, NonFiniteRejected) {
  EXPECT_THROW(Jet({NAN, 1}), DomainError);
  EXPECT_THROW(exp(Jet({1000, 1})), DomainError);
}

TEST(JetProperty, RingAxioms) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = static_cast<int>(rng() % 10);
    Jet a = random_jet(rng, r), b = random_jet(rng, r), c = random_jet(rng, r);
    Jet lhs = a * (b + c), rhs = a * b + a * c;
    Jet ab = a * b, ba = b * a;
    for (int i = 0; i <= r; ++i) {
      EXPECT_NEAR(lhs[i], rhs[i], 1e-13);
      EXPECT_NEAR(ab[i], ba[i], 1e-13);
    }
  }
}

TEST(JetProperty, DivisionInvertsMultiplication) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> sgn(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = static_cast<int>(rng() % 10);
    Jet a = random_jet(rng, r);
    Jet b = random_jet(rng, r, 0.1, 2.0);
    if (sgn(rng) < 0.5) b = -b;
    Jet q = a / b;
    Jet back = q * b;
    for (int i = 0; i <= r; ++i) {
      // Scale of the Cauchy sum that forms coefficient i.
      double scale = 0;
      for (int j = 0; j <= i; ++j) scale += std::fabs(q[j] * b[i - j]);
      EXPECT_NEAR(back[i], a[i], 1e-12 * std::max(1.0, scale));
    }
  }
}

TEST(JetProperty, ApplyMatchesCompositionOracle) {
  using K = ElementaryFn::Kind;
  const std::vector<ElementaryFn> fns = {
      ElementaryFn::of(K::exp),  ElementaryFn::of(K::log),  ElementaryFn::of(K::sin),
      ElementaryFn::of(K::cos),  ElementaryFn::of(K::tan),  ElementaryFn::of(K::atan),
      ElementaryFn::of(K::sqrt), ElementaryFn::power(2.5), ElementaryFn::power(-1.5),
      ElementaryFn::power(3)};
  std::mt19937_64 rng(3);
  for (const auto& f : fns) {
    for (int trial = 0; trial < 100; ++trial) {
      const int r = 8;
      const bool positive = f.kind == K::log || f.kind == K::sqrt || f.kind == K::pow;
      Jet a = positive ? random_jet(rng, r, 0.5, 2.0) : random_jet(rng, r, -1.0, 1.0);
      Poly pa(a.coeffs().begin(), a.coeffs().end());
      Poly want = compose_oracle(f, pa, r);
      Jet got = jet_apply(f, a);
      for (int i = 0; i <= r; ++i) {
        const double scale = std::max(1.0, std::fabs(want[i]));
        EXPECT_NEAR(got[i], want[i], 1e-10 * scale) << f.name() << " coefficient " << i;
      }
    }
  }
}
