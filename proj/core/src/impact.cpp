#include <cmath>
#include <numbers>

#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

namespace {

double pick(double c, double a, double b) { return c >= 0 ? a : b; }
Var pick(Var c, Var a, Var b) { return select(c, Cmp::ge, 0.0, a, b); }

double root(double x) { return std::sqrt(x); }
Var root(Var x) { return sqrt(x); }

// Solves A y = b for symmetric positive definite A (row-major, m x m)
// without pivoting. The double version rejects tiny pivots.
template <class T>
std::vector<T> spd_solve(std::vector<T> a, std::vector<T> b, int m) {
  auto at = [&](int i, int j) -> T& { return a[static_cast<std::size_t>(i * m + j)]; };
  double scale = 0;
  if constexpr (std::is_same_v<T, double>)
    for (const double v : a) scale = std::max(scale, std::abs(v));
  for (int k = 0; k < m; ++k) {
    if constexpr (std::is_same_v<T, double>) {
      if (!(std::abs(at(k, k)) > 1e-14 * scale)) throw SingularMetric("kinetic metric is singular at the impact point");
    }
    for (int i = k + 1; i < m; ++i) {
      T r = at(i, k) / at(k, k);
      for (int j = k + 1; j < m; ++j) at(i, j) = at(i, j) - r * at(k, j);
      b[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] - r * b[static_cast<std::size_t>(k)];
    }
  }
  std::vector<T> y(static_cast<std::size_t>(m), b[0]);
  for (int i = m - 1; i >= 0; --i) {
    T s = b[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < m; ++j) s = s - at(i, j) * y[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s / at(i, i);
  }
  return y;
}

template <class T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
  T s = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

template <class T>
struct Law {
  std::vector<T> v_post;
  std::vector<T> normal;  // A^-1 grad f
  T g, alpha_pre, alpha_post, vs, e_pre, e_post, disc;
};

// Velocity split v = w + alpha n with n = A^-1 grad f, so grad f . w = 0 and
// v'Av = w'Aw + g alpha^2, g = grad f' A^-1 grad f. The surface moves with
// normal speed vs = -f_t / g.
template <class T>
Law<T> law(const std::vector<T>& a, const std::vector<T>& grad, T ft, T e_neg, T e_pos, const std::vector<T>& v) {
  const int m = static_cast<int>(v.size());
  Law<T> r;
  r.normal = spd_solve(a, grad, m);
  r.g = dot(grad, r.normal);
  if constexpr (std::is_same_v<T, double>) {
    if (!(r.g > 0)) throw SingularMetric("kinetic metric is not positive definite along the surface normal");
  }
  r.alpha_pre = dot(grad, v) / r.g;
  r.vs = (0.0 - ft) / r.g;
  T rel = r.alpha_pre - r.vs;
  // Coming from f < 0 when f increases along the motion.
  r.e_pre = pick(rel, e_neg, e_pos);
  r.e_post = pick(rel, e_pos, e_neg);
  r.disc = rel * rel + (r.e_pre - r.e_post) / r.g;
  T through = pick(rel, root(r.disc), 0.0 - root(r.disc));
  T rel_post = pick(r.disc, through, 0.0 - rel);
  r.alpha_post = r.vs + rel_post;
  T jump = rel_post - rel;
  for (int i = 0; i < m; ++i)
    r.v_post.push_back(v[static_cast<std::size_t>(i)] + jump * r.normal[static_cast<std::size_t>(i)]);
  return r;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

ImpactResult impact_law(const Eigen::MatrixXd& A, const Eigen::VectorXd& grad, double ft, double e_neg, double e_pos,
                        const Eigen::VectorXd& v) {
  const auto m = v.size();
  if (A.rows() != m || A.cols() != m || grad.size() != m) throw DimensionMismatch("impact law: A, grad f and v sizes differ");
  std::vector<double> a;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a.push_back(A(i, j));
  auto r = law<double>(a, to_vec(grad), ft, e_neg, e_pos, to_vec(v));
  const double rate = r.g * (r.alpha_pre - r.vs);
  const double scale = std::sqrt(r.g) * (std::abs(r.alpha_pre) + std::abs(r.vs)) + std::abs(ft);
  if (!(std::abs(rate) > 1e-12 * std::max(scale, 1e-300)) || rate == 0) throw NonTransversal(rate);

  ImpactResult out;
  out.v = Eigen::Map<const Eigen::VectorXd>(r.v_post.data(), m);
  out.rebound = r.disc < 0;
  out.normal_pre = r.alpha_pre;
  out.normal_post = r.alpha_post;
  out.surface_speed = r.vs;
  out.potential_pre = r.e_pre;
  out.potential_post = r.e_post;
  Eigen::VectorXd n = Eigen::Map<const Eigen::VectorXd>(r.normal.data(), m);
  Eigen::VectorXd rest_pre = v - r.vs * n;
  Eigen::VectorXd rest_post = out.v - r.vs * n;
  out.kinetic_pre = rest_pre.dot(A * rest_pre);
  out.kinetic_post = rest_post.dot(A * rest_post);
  return out;
}

namespace {

struct SurfaceVars {
  std::vector<Var> a, grad;
  Var f, ft, e_neg, e_pos;
};

// Replays the surface tapes at q (vars), t, theta into rec.
SurfaceVars surface_vars(Recorder& rec, const ImpactSurface& s, const std::vector<Var>& in) {
  SurfaceVars r;
  r.a = replay(rec, s.metric, in);
  const int nq = static_cast<int>(s.q.size());
  for (int j = 0; j <= nq; ++j) {
    auto d = replay(rec, derivative_tape(s.guard, j), in);
    if (j == 0) r.f = d[0];
    if (j < nq)
      r.grad.push_back(d[1]);
    else
      r.ft = d[1];
  }
  auto e = replay(rec, s.potential, in);
  r.e_neg = e[0];
  r.e_pos = e[1];
  return r;
}

}  // namespace

Tape impact_map_tape(const ImpactSurface& s, int n, int np) {
  Recorder rec(n + 1 + np);
  std::vector<Var> x, in, v;
  for (int i = 0; i < n; ++i) x.push_back(rec.input(i));
  for (int i : s.q) in.push_back(x[static_cast<std::size_t>(i)]);
  in.push_back(rec.input(n));
  for (int j = 0; j < np; ++j) in.push_back(rec.input(n + 1 + j));
  for (int i : s.v) v.push_back(x[static_cast<std::size_t>(i)]);
  auto sv = surface_vars(rec, s, in);
  auto r = law<Var>(sv.a, sv.grad, sv.ft, sv.e_neg, sv.e_pos, v);
  auto post = x;
  for (std::size_t i = 0; i < s.v.size(); ++i) post[static_cast<std::size_t>(s.v[i])] = r.v_post[i];
  for (const auto& p : post) rec.output(p);
  return rec.build();
}

ImpactResult impact_update(const ImpactSurface& s, std::span<const double> q, std::span<const double> v, double t,
                           std::span<const double> theta) {
  const int m = static_cast<int>(s.q.size());
  if (static_cast<int>(q.size()) != m || static_cast<int>(v.size()) != m)
    throw DimensionMismatch("impact_update: q and v must match the surface");
  std::vector<double> in(q.begin(), q.end());
  in.push_back(t);
  in.insert(in.end(), theta.begin(), theta.end());
  auto a = tape_eval(s.metric, in);
  Eigen::MatrixXd A(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) A(i, j) = a[static_cast<std::size_t>(i * m + j)];
  auto gr = forward_gradient(s.guard, in);
  Eigen::VectorXd grad = gr.row(0).head(m).transpose();
  auto e = tape_eval(s.potential, in);
  return impact_law(A, grad, gr(0, m), e[0], e[1], Eigen::Map<const Eigen::VectorXd>(v.data(), m));
}

OdeModel smooth_impacts(const OdeModel& m, double a) {
  if (!(a > 0)) throw Error("smoothing slope must be positive");
  OdeModel out = m;
  out.events.clear();
  Recorder rec(m.dynamics_inputs());
  std::vector<Var> in;
  for (int j = 0; j < m.dynamics_inputs(); ++j) in.push_back(rec.input(j));
  auto outs = replay(rec, m.dynamics, in);
  for (const auto& e : m.events) {
    const auto* s = std::get_if<ImpactSurface>(&e.action);
    if (!s) {
      out.events.push_back(e);
      continue;
    }
    std::vector<Var> sin;
    for (int i : s->q) sin.push_back(in[static_cast<std::size_t>(i)]);
    sin.push_back(in[static_cast<std::size_t>(m.in_t())]);
    for (int j = 0; j < m.np(); ++j) sin.push_back(in[static_cast<std::size_t>(m.in_theta() + j)]);
    auto sv = surface_vars(rec, *s, sin);
    // d/df of 1/2 + atan(a f)/pi
    Var hp = a / (std::numbers::pi * (1.0 + (a * a) * (sv.f * sv.f)));
    auto y = spd_solve(sv.a, sv.grad, static_cast<int>(s->q.size()));
    Var w = -0.5 * ((sv.e_pos - sv.e_neg) * hp);
    for (std::size_t i = 0; i < s->v.size(); ++i) {
      auto& fv = outs[static_cast<std::size_t>(s->v[i])];
      fv = fv + w * y[i];
    }
  }
  for (const auto& o : outs) rec.output(o);
  out.dynamics = rec.build();
  return out;
}

}  // namespace hybridad
