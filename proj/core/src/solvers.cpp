#include "hybridad/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridad/errors.hpp"

namespace hybridad {

ImplicitSystem make_implicit_system(int nx, int ntheta, const ResidualFn& residual) {
  if (nx < 1 || ntheta < 0) throw DimensionMismatch("implicit system needs nx >= 1 and ntheta >= 0");
  Recorder rec(nx + ntheta);
  std::vector<Var> x, th;
  for (int i = 0; i < nx; ++i) x.push_back(rec.input(i));
  for (int j = 0; j < ntheta; ++j) th.push_back(rec.input(nx + j));
  auto p = residual(rec, x, th);
  if (static_cast<int>(p.size()) != nx) throw DimensionMismatch("residual must return one value per unknown");
  for (const auto& v : p) rec.output(v);
  return {rec.build(), nx, ntheta};
}

namespace {

std::vector<double> stack(std::span<const double> x, std::span<const double> theta) {
  std::vector<double> in(x.begin(), x.end());
  in.insert(in.end(), theta.begin(), theta.end());
  return in;
}

void check_shapes(const ImplicitSystem& s, std::size_t nx, std::size_t nth) {
  if (static_cast<int>(nx) != s.nx || static_cast<int>(nth) != s.ntheta)
    throw DimensionMismatch("x or theta size does not match the system");
}

// Residual and full Jacobian (rows by reverse sweeps).
void linearize(const ImplicitSystem& s, std::span<const double> in, Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
  Evaluator ev(s.residual);
  ev.run(in);
  p.resize(s.nx);
  jac.resize(s.nx, static_cast<Eigen::Index>(in.size()));
  std::vector<double> g(in.size());
  for (int i = 0; i < s.nx; ++i) {
    p(i) = ev.output(i);
    ev.adjoint(i, g);
    for (std::size_t j = 0; j < g.size(); ++j) jac(i, static_cast<Eigen::Index>(j)) = g[j];
  }
}

Eigen::FullPivLU<Eigen::MatrixXd> factor(const Eigen::MatrixXd& jx) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jx);
  if (!lu.isInvertible() || !std::isfinite(jx.norm())) throw SingularJacobian("Jacobian of the residual is singular");
  return lu;
}

}  // namespace

NewtonResult newton(const ImplicitSystem& s, std::span<const double> x0, std::span<const double> theta, double tol,
                    int max_iter) {
  check_shapes(s, x0.size(), theta.size());
  if (!(tol > 0)) throw Error("tol must be positive");
  std::vector<double> x(x0.begin(), x0.end());
  for (double v : x)
    if (!std::isfinite(v)) throw Error("initial guess must be finite");
  std::vector<double> best = x;
  double best_res = std::numeric_limits<double>::infinity();
  Eigen::VectorXd p;
  Eigen::MatrixXd jac;
  for (int it = 0; it <= max_iter; ++it) {
    linearize(s, stack(x, theta), p, jac);
    const double res = p.lpNorm<Eigen::Infinity>();
    if (res < best_res) {
      best_res = res;
      best = x;
    }
    if (it == max_iter) break;
    Eigen::VectorXd step = -factor(jac.leftCols(s.nx)).solve(p);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), s.nx);
    if (step.lpNorm<Eigen::Infinity>() <= tol * std::max(xv.lpNorm<Eigen::Infinity>(), 1e-300))
      return {x, it, res};
    for (int i = 0; i < s.nx; ++i) x[static_cast<std::size_t>(i)] += step(i);
  }
  throw MaxIterExceeded(max_iter, best, best_res);
}

Eigen::MatrixXd implicit_sensitivity(const ImplicitSystem& s, std::span<const double> root,
                                     std::span<const double> theta) {
  check_shapes(s, root.size(), theta.size());
  Eigen::VectorXd p;
  Eigen::MatrixXd jac;
  linearize(s, stack(root, theta), p, jac);
  return -factor(jac.leftCols(s.nx)).solve(jac.rightCols(s.ntheta));
}

Jet implicit_jet(const ImplicitSystem& s, double root, std::span<const Jet> theta_jet) {
  if (s.nx != 1) throw DimensionMismatch("implicit_jet needs a scalar system");
  check_shapes(s, 1, theta_jet.size());
  const int order = theta_jet.empty() ? 0 : theta_jet[0].order();
  std::vector<double> th;
  for (const auto& j : theta_jet) th.push_back(j.value());
  Eigen::VectorXd p;
  Eigen::MatrixXd jac;
  linearize(s, stack(std::span<const double>(&root, 1), th), p, jac);
  const double px = jac(0, 0);
  if (px == 0 || !std::isfinite(px)) throw SingularJacobian("dP/dx vanishes at the root");

  // P(x(e), theta(e)) = 0 is linear in coefficient k once 0..k-1 are known.
  std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
  c[0] = root;
  std::vector<Jet> in(1 + theta_jet.size());
  std::copy(theta_jet.begin(), theta_jet.end(), in.begin() + 1);
  for (int k = 1; k <= order; ++k) {
    in[0] = Jet(c);
    const Jet r = tape_jet_eval(s.residual, in)[0];
    c[static_cast<std::size_t>(k)] = -r[k] / px;
  }
  return Jet(c);
}

NewtonJetResult newton_jet(const ImplicitSystem& s, std::span<const Jet> theta_jet, double x0, double tol,
                           int fixed_iterations, int max_iter) {
  if (s.nx != 1) throw DimensionMismatch("newton_jet needs a scalar system");
  check_shapes(s, 1, theta_jet.size());
  if (theta_jet.empty()) throw DimensionMismatch("newton_jet needs a parameter jet");
  const int order = theta_jet[0].order();
  if (order < 1) throw DomainError("newton_jet needs order >= 1");
  const Tape both = derivative_tape(s.residual, 0);  // [P, P_x]
  std::vector<Jet> in(1 + theta_jet.size());
  std::copy(theta_jet.begin(), theta_jet.end(), in.begin() + 1);
  Jet x = Jet::constant(x0, order);
  const int margin = static_cast<int>(std::ceil(std::log2(static_cast<double>(order) + 1)));
  int extra = -1;  // iterations left after convergence; -1 before
  for (int it = 0;; ++it) {
    if (fixed_iterations >= 0 && it == fixed_iterations) return {x, it};
    if (extra == 0) return {x, it};
    if (it == max_iter) throw MaxIterExceeded(it, {x.value()}, std::numeric_limits<double>::quiet_NaN());
    in[0] = x;
    auto r = tape_jet_eval(both, in);
    if (r[1].value() == 0) throw SingularJacobian("dP/dx vanishes during the iteration");
    const Jet step = r[0] / r[1];
    if (fixed_iterations < 0 && extra < 0 && std::abs(step.value()) <= tol * std::max(std::abs(x.value()), 1e-300))
      extra = margin + 1;  // this step, then the margin
    x = x - step;
    if (extra > 0) --extra;
  }
}

WarmStartReport warm_start_probe(const ImplicitSystem& s, std::span<const double> theta_grid, double tol) {
  if (s.nx != 1 || s.ntheta != 1) throw DimensionMismatch("warm_start_probe needs a scalar system with scalar theta");
  WarmStartReport rep;
  double x = 1.0;
  for (double th : theta_grid) {
    auto r = newton(s, std::span<const double>(&x, 1), std::span<const double>(&th, 1), tol);
    x = r.x[0];
    rep.theta.push_back(th);
    rep.root.push_back(x);
    rep.total_iterations += r.iterations;
  }
  std::size_t flat = 0;
  for (std::size_t i = 1; i < rep.root.size(); ++i) flat += rep.root[i] == rep.root[i - 1];
  if (rep.root.size() > 1) rep.constant_fraction = static_cast<double>(flat) / static_cast<double>(rep.root.size() - 1);
  return rep;
}

}  // namespace hybridad
