#include "tables.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hybridad/sim.hpp"
#include "hybridad/solvers.hpp"

namespace hybridad::cli {

namespace {

OdeModel riccati() {
  OdeDefinition def;
  def.states = {"f"};
  def.initial = {ParamExpr(1.0)};
  def.rhs = [](OdeContext& c) {
    c.f = {-(c.x[0] * c.x[0])};
    c.outputs = {{"f", c.x[0]}};
  };
  return make_ode(def);
}

ImplicitSystem sqrt_system() {
  return make_implicit_system(1, 1, [](Recorder&, const std::vector<Var>& x, const std::vector<Var>& a) {
    return std::vector<Var>{x[0] * x[0] - a[0]};
  });
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Rk4Table rk4_table(int orders) {
  const OdeModel m = riccati();
  const auto mid = step_jet(m, Method::midpoint, orders);
  const auto rk = step_jet(m, Method::rk4, orders);
  Rk4Table t;
  double fact = 1;
  for (int i = 1; i <= orders; ++i) {
    fact *= i;
    t.exact.push_back((i % 2 ? -1 : 1) * fact);
    t.midpoint.push_back(mid[0].derivative(i));
    t.rk4.push_back(rk[0].derivative(i));
  }
  return t;
}

NewtonSqrtTable newton_sqrt_table() {
  NewtonSqrtTable t;
  const auto s = sqrt_system();
  const double a = 1.5, c = 1.00001, eps = 1e-4;
  // Stopping at |(a/x - x)/x| <= eps is a relative Newton step of eps/2.
  t.procedure_root = newton(s, {&c, 1}, {&a, 1}, eps / 2).x[0];
  const std::vector<Jet> theta{Jet::variable(a, 2)};
  t.procedure_rule = implicit_jet(s, t.procedure_root, theta).derivative(2);
  t.exact = implicit_jet(s, std::sqrt(a), theta).derivative(2);

  Jet x = Jet::constant(c, 2);
  Jet b = theta[0] / x;
  while (std::abs(((b - x) / x).value()) > eps) {
    x = 0.5 * x + 0.5 * b;
    b = theta[0] / x;
  }
  t.through_loop = x.derivative(2);

  const std::vector<Jet> two{Jet::variable(2, 19)};
  t.jet3 = newton_jet(s, two, 1.0, 1e-12, 3).x.derivative(19);
  auto conv = newton_jet(s, two, 1.0);
  t.jet_converged = conv.x.derivative(19);
  t.jet_converged_iterations = conv.iterations;
  t.jet_exact = implicit_jet(s, std::sqrt(2.0), two).derivative(19);
  return t;
}

std::vector<WarmStartRow> warmstart_table(const std::vector<double>& tols) {
  const auto s = sqrt_system();
  std::vector<double> grid;
  for (int i = 0; i <= 1900; ++i) grid.push_back(0.1 + i * 1e-3);
  std::vector<WarmStartRow> rows;
  for (double tol : tols) rows.push_back({tol, warm_start_probe(s, grid, tol).constant_fraction});
  return rows;
}

std::string render_rk4(const Rk4Table& t) {
  std::ostringstream os;
  auto row = [&](const char* name, const std::vector<double>& v) {
    os << name;
    for (double x : v) os << "," << fmt(x);
    os << "\n";
  };
  os << "order";
  for (std::size_t i = 1; i <= t.exact.size(); ++i) os << "," << i;
  os << "\n";
  row("exact", t.exact);
  row("Midpoint", t.midpoint);
  row("RK4", t.rk4);
  return os.str();
}

std::string render_newton_sqrt(const NewtonSqrtTable& t) {
  std::ostringstream os;
  os << "d2/da2 sqrt(a) at a=1.5\n"
     << "  procedure root g(1.5,1e-4,1.00001)   " << fmt(t.procedure_root) << "\n"
     << "  derivative rule at procedure root    " << fmt(t.procedure_rule) << "\n"
     << "  jets through the loop                " << fmt(t.through_loop) << "\n"
     << "  exact                                " << fmt(t.exact) << "\n"
     << "d19/da19 sqrt(a) at a=2, Newton on jets\n"
     << "  3 iterations                         " << fmt(t.jet3) << "\n"
     << "  converged (" << t.jet_converged_iterations << " iterations)" << std::string(t.jet_converged_iterations < 10 ? 14 : 13, ' ')
     << fmt(t.jet_converged) << "\n"
     << "  exact                                " << fmt(t.jet_exact) << "\n";
  return os.str();
}

std::string render_warmstart(const std::vector<WarmStartRow>& rows) {
  std::ostringstream os;
  os << "tol,constant_fraction\n";
  for (const auto& r : rows) os << fmt(r.tol) << "," << fmt(r.constant_fraction) << "\n";
  return os.str();
}

}  // namespace hybridad::cli
