#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hybridad/errors.hpp"
#include "hybridad/solvers.hpp"

using namespace hybridad;

namespace {

// x^2 - a = 0
ImplicitSystem sqrt_system() {
  return make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{x[0] * x[0] - th[0]};
  });
}

std::vector<Jet> jet_theta(double a, int order) { return {Jet::variable(a, order)}; }

// d^k/da^k sqrt(a) = prod_{i<k}(1/2 - i) a^{1/2 - k}
double sqrt_derivative(double a, int k) {
  double c = 1;
  for (int i = 0; i < k; ++i) c *= 0.5 - i;
  return c * std::pow(a, 0.5 - k);
}

}  // namespace

TEST(Newton, SqrtConvergesQuickly) {
  auto s = sqrt_system();
  const double x0 = 1, a = 2;
  auto r = newton(s, {&x0, 1}, {&a, 1});
  EXPECT_NEAR(r.x[0], std::sqrt(2.0), 1e-15);
  EXPECT_LE(r.iterations, 6);
  EXPECT_LT(r.residual, 1e-14);
}

TEST(Newton, TwoByTwoSystem) {
  // x0 + x1 = t0, x0 * x1 = t1; root (2, 3) for t = (5, 6)
  auto s = make_implicit_system(2, 2, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& t) {
    return std::vector<Var>{x[0] + x[1] - t[0], x[0] * x[1] - t[1]};
  });
  const std::vector<double> x0{1.5, 3.5}, th{5, 6};
  auto r = newton(s, x0, th);
  EXPECT_NEAR(r.x[0], 2, 1e-12);
  EXPECT_NEAR(r.x[1], 3, 1e-12);
  // d(x0, x1)/d(t0, t1) = [[x0, -1], [-x1, 1]] / (x0 - x1)
  auto d = implicit_sensitivity(s, r.x, th);
  EXPECT_NEAR(d(0, 0), -2, 1e-10);
  EXPECT_NEAR(d(0, 1), 1, 1e-10);
  EXPECT_NEAR(d(1, 0), 3, 1e-10);
  EXPECT_NEAR(d(1, 1), -1, 1e-10);
}

TEST(Newton, ExpCubicRootAtZero) {
  auto s = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{exp(x[0]) + x[0] * x[0] * x[0] - th[0]};
  });
  const double x0 = 0.5, b = 1;
  auto r = newton(s, {&x0, 1}, {&b, 1});
  EXPECT_NEAR(r.x[0], 0, 1e-14);
  // dx/db = 1 / (e^x + 3x^2) = 1 at the root
  EXPECT_NEAR(implicit_sensitivity(s, r.x, {&b, 1})(0, 0), 1.0, 1e-12);
}

TEST(Newton, NoRealRootThrowsWithBestIterate) {
  auto s = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{x[0] * x[0] + th[0]};
  });
  const double x0 = 0.3, one = 1;
  try {
    newton(s, {&x0, 1}, {&one, 1}, 1e-12, 30);
    FAIL() << "expected MaxIterExceeded";
  } catch (const MaxIterExceeded& e) {
    EXPECT_EQ(e.iterations(), 30);
    EXPECT_GE(e.best_residual(), 1.0);
  }
}

TEST(Newton, SingularJacobian) {
  auto s = sqrt_system();
  const double x0 = 0, a = 2;
  EXPECT_THROW(newton(s, {&x0, 1}, {&a, 1}), SingularJacobian);
}

TEST(Newton, ShapeChecks) {
  auto s = sqrt_system();
  const std::vector<double> x0{1, 1};
  const double a = 2;
  EXPECT_THROW(newton(s, x0, {&a, 1}), DimensionMismatch);
  EXPECT_THROW(make_implicit_system(2, 1,
                                    [](Recorder&, const std::vector<Var>& x, const std::vector<Var>&) {
                                      return std::vector<Var>{x[0]};
                                    }),
               DimensionMismatch);
}

TEST(ImplicitSensitivity, SqrtFirstDerivative) {
  auto s = sqrt_system();
  const double root = std::sqrt(1.5), a = 1.5;
  EXPECT_NEAR(implicit_sensitivity(s, {&root, 1}, {&a, 1})(0, 0), 0.5 / std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(implicit_sensitivity(s, {&root, 1}, {&a, 1})(0, 0), 0.40825, 1e-5);
}

TEST(ImplicitJet, SqrtSecondDerivative) {
  auto s = sqrt_system();
  auto th = jet_theta(1.5, 2);
  const Jet x = implicit_jet(s, std::sqrt(1.5), th);
  EXPECT_NEAR(x.derivative(2), -0.1360827636, 5e-10);
  EXPECT_NEAR(x.derivative(2), -0.25 * std::pow(1.5, -1.5), 1e-15);
}

TEST(ImplicitJet, ToleranceRootGivesProcedureValue) {
  // Root from the loose-tolerance iteration started at 1.00001; the
  // derivative rule -1/(4 x^3) is then evaluated at that inexact root.
  auto s = sqrt_system();
  const double x0 = 1.00001, a = 1.5;
  auto r = newton(s, {&x0, 1}, {&a, 1}, 5e-5);
  const Jet x = implicit_jet(s, r.x[0], jet_theta(a, 2));
  EXPECT_NEAR(x.derivative(2), -0.1360827546, 1e-9);
  EXPECT_NEAR(x.derivative(2), -0.25 / std::pow(r.x[0], 3), 1e-15);
}

TEST(ImplicitJet, HighOrderMatchesClosedForm) {
  auto s = sqrt_system();
  const Jet x = implicit_jet(s, std::sqrt(2.0), jet_theta(2, 12));
  for (int k = 0; k <= 12; ++k)
    EXPECT_NEAR(x.derivative(k), sqrt_derivative(2, k), 1e-11 * std::abs(sqrt_derivative(2, k))) << k;
}

TEST(ImplicitJet, OrderOneEqualsImplicitSensitivity) {
  auto s = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{sin(x[0]) + x[0] * th[0] - 1.0};
  });
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.5, 3);
  for (int i = 0; i < 20; ++i) {
    const double th = u(gen), x0 = 0.5;
    auto r = newton(s, {&x0, 1}, {&th, 1});
    const Jet j = implicit_jet(s, r.x[0], jet_theta(th, 1));
    EXPECT_NEAR(j.derivative(1), implicit_sensitivity(s, r.x, {&th, 1})(0, 0), 1e-13);
  }
}

TEST(NewtonJet, ThreeIterationsAtOrderNineteen) {
  auto s = sqrt_system();
  auto r = newton_jet(s, jet_theta(2, 19), 1.0, 1e-12, 3);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_NEAR(r.x.derivative(19), 1.141438794e9, 1e3);
}

TEST(NewtonJet, ConvergesToClosedForm) {
  auto s = sqrt_system();
  const double exact = sqrt_derivative(2, 19);
  EXPECT_NEAR(exact, 1.140326912e9, 1e2);
  for (int its : {5, 6, 8}) {
    auto r = newton_jet(s, jet_theta(2, 19), 1.0, 1e-12, its);
    EXPECT_NEAR(r.x.derivative(19), exact, 1e-9 * std::abs(exact)) << its;
  }
  auto r = newton_jet(s, jet_theta(2, 19), 1.0);
  EXPECT_NEAR(r.x.derivative(19), exact, 1e-9 * std::abs(exact));
}

TEST(NewtonJet, CorrectOrdersDoublePerIteration) {
  // Starting from the exact constant term, iteration k fixes 2^k - 1 orders.
  auto s = sqrt_system();
  auto exact = implicit_jet(s, std::sqrt(2.0), jet_theta(2, 15));
  for (int k = 1; k <= 4; ++k) {
    auto r = newton_jet(s, jet_theta(2, 15), std::sqrt(2.0), 1e-12, k);
    const int good = (1 << k) - 1;
    for (int i = 0; i <= good; ++i) EXPECT_NEAR(r.x[i], exact[i], 1e-12 * std::max(1.0, std::abs(exact[i])));
    if (good + 1 <= 15) EXPECT_GT(std::abs(r.x[good + 1] - exact[good + 1]), 1e-12);
  }
}

TEST(NewtonJet, RejectsOrderZero) {
  auto s = sqrt_system();
  EXPECT_THROW(newton_jet(s, jet_theta(2, 0), 1.0), DomainError);
}

TEST(WarmStart, LooseToleranceFreezesRoots) {
  auto s = sqrt_system();
  std::vector<double> grid;
  for (int i = 0; i <= 1900; ++i) grid.push_back(0.1 + i * 1e-3);
  auto loose = warm_start_probe(s, grid, 5e-2);
  EXPECT_GE(loose.constant_fraction, 0.5);
  auto tight = warm_start_probe(s, grid, 1e-14);
  EXPECT_LE(tight.constant_fraction, 0.01);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(tight.root[i], std::sqrt(grid[i]), 1e-14);
}

TEST(WarmStart, ConstantFamilyIsFullyFlat) {
  auto s = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{x[0] - 3.0 + 0.0 * th[0]};
  });
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(warm_start_probe(s, grid, 1e-12).constant_fraction, 1.0);
}

TEST(ImplicitSensitivity, MatchesCentralDifferenceOfRoot) {
  auto s = make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& th) {
    return std::vector<Var>{x[0] * x[0] * x[0] + th[0] * x[0] - 2.0};
  });
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0.2, 4);
  for (int i = 0; i < 50; ++i) {
    const double th = u(gen), x0 = 1, h = 1e-6;
    auto root = [&](double t) { return newton(s, {&x0, 1}, {&t, 1}, 1e-14).x[0]; };
    const double fd = (root(th + h) - root(th - h)) / (2 * h);
    const double r = root(th);
    const double ad = implicit_sensitivity(s, {&r, 1}, {&th, 1})(0, 0);
    EXPECT_NEAR(ad, fd, 1e-7 * std::abs(ad));
  }
}
