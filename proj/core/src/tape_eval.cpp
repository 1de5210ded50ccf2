#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridad/errors.hpp"
#include "hybridad/tape.hpp"

namespace hybridad {

namespace {

enum Status : std::uint8_t { ok = 0, domain = 1, nondiff = 2, poisoned = 3 };

std::string failure_text(const Node& n) {
  switch (n.kind) {
    case NodeKind::div: return "division by zero";
    case NodeKind::apply: return n.fn.name() + " evaluated outside its domain";
    default: return "evaluation failed";
  }
}

// Marks nodes reachable from the outputs through taken arms (`needed`) and
// the subset that carries derivatives (`diff`: not reached only through a
// branch condition).
void mark(const Tape& t, const std::vector<std::uint8_t>& then_taken,
          std::vector<std::uint8_t>& needed, std::vector<std::uint8_t>& diff) {
  const int n = t.size();
  needed.assign(static_cast<std::size_t>(n), 0);
  diff.assign(static_cast<std::size_t>(n), 0);
  for (int o : t.outputs()) needed[o] = diff[o] = 1;
  for (int id = n - 1; id >= 0; --id) {
    if (!needed[id]) continue;
    const Node& nd = t.node(id);
    const bool d = diff[id] != 0;
    switch (nd.kind) {
      case NodeKind::input:
      case NodeKind::constant: break;
      case NodeKind::apply:
        needed[nd.a] = 1;
        if (d) diff[nd.a] = 1;
        break;
      case NodeKind::branch: {
        needed[nd.a] = 1;
        const int arm = then_taken[id] ? nd.b : nd.c;
        needed[arm] = 1;
        if (d) diff[arm] = 1;
        break;
      }
      default:
        needed[nd.a] = needed[nd.b] = 1;
        if (d) diff[nd.a] = diff[nd.b] = 1;
        break;
    }
  }
}

void check_inputs(const Tape& t, std::size_t n) {
  if (n != static_cast<std::size_t>(t.num_inputs()))
    throw DimensionMismatch("tape expects " + std::to_string(t.num_inputs()) + " inputs, got " +
                            std::to_string(n));
}

}  // namespace

Evaluator::Evaluator(const Tape& t) : t_(&t) {
  const auto n = static_cast<std::size_t>(t.size());
  value_.resize(n);
  status_.resize(n);
  then_.resize(n);
  dot_.resize(n);
  bar_.resize(n);
  d1_.resize(n);
  d2_.resize(n);
}

void Evaluator::run(std::span<const double> x, const ForcedArms* forced) {
  const Tape& t = *t_;
  check_inputs(t, x.size());
  const int n = t.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int id = 0; id < n; ++id) {
    const Node& nd = t.node(id);
    double& v = value_[id];
    std::uint8_t& st = status_[id];
    st = ok;
    switch (nd.kind) {
      case NodeKind::input: v = x[static_cast<std::size_t>(nd.input)]; break;
      case NodeKind::constant: v = nd.value; break;
      case NodeKind::apply:
        if (status_[nd.a]) {
          st = poisoned;
          v = nan;
        } else {
          FnStatus fs = eval_fn(nd.fn, value_[nd.a], v);
          if (fs != FnStatus::ok) {
            st = fs == FnStatus::domain ? domain : nondiff;
            v = nan;
          }
        }
        break;
      case NodeKind::branch: {
        bool take_then;
        auto f = forced ? forced->find(id) : ForcedArms::const_iterator{};
        if (forced && f != forced->end())
          take_then = f->second;
        else
          take_then = compare(nd.cmp, value_[nd.a], nd.value);
        then_[id] = take_then ? 1 : 0;
        const int arm = take_then ? nd.b : nd.c;
        v = value_[arm];
        if (status_[nd.a] || status_[arm]) st = poisoned;
        break;
      }
      default: {
        if (status_[nd.a] || status_[nd.b]) {
          st = poisoned;
          v = nan;
          break;
        }
        const double a = value_[nd.a], b = value_[nd.b];
        switch (nd.kind) {
          case NodeKind::add: v = a + b; break;
          case NodeKind::sub: v = a - b; break;
          case NodeKind::mul: v = a * b; break;
          default:
            if (b == 0) {
              st = domain;
              v = nan;
            } else {
              v = a / b;
            }
        }
        if (st == ok && !std::isfinite(v) && std::isfinite(a) && std::isfinite(b)) st = domain;
      }
    }
  }
  mark(t, then_, needed_, diff_);
  for (int id = 0; id < n; ++id) {
    if (!needed_[id]) continue;
    if (status_[id] == domain) throw EvalDomainError(id, failure_text(t.node(id)));
    if (status_[id] == nondiff) throw NonDifferentiablePoint(id, t.node(id).fn.name() + " at 0");
  }
  diff_list_.clear();
  for (int id = 0; id < n; ++id)
    if (diff_[id]) diff_list_.push_back(id);
  derivs_ready_ = false;
}

double Evaluator::output(int k) const { return value_[t_->outputs()[static_cast<std::size_t>(k)]]; }

void Evaluator::outputs(std::span<double> out) const {
  for (int k = 0; k < t_->num_outputs(); ++k) out[static_cast<std::size_t>(k)] = output(k);
}

std::vector<double> Evaluator::outputs() const {
  std::vector<double> out(static_cast<std::size_t>(t_->num_outputs()));
  outputs(out);
  return out;
}

void Evaluator::prepare_derivs() {
  if (derivs_ready_) return;
  for (int id : diff_list_) {
    const Node& nd = t_->node(id);
    if (nd.kind != NodeKind::apply) continue;
    FnDerivs d{};
    if (derivs_fn(nd.fn, value_[nd.a], d) != FnStatus::ok)
      throw NonDifferentiablePoint(id, nd.fn.name() + " is not differentiable at " +
                                           std::to_string(value_[nd.a]));
    d1_[id] = d.d1;
    d2_[id] = d.d2;
  }
  derivs_ready_ = true;
}

void Evaluator::forward_nodes(std::span<const double> dx) {
  prepare_derivs();
  const Tape& t = *t_;
  for (int id : diff_list_) {
    const Node& nd = t.node(id);
    double& d = dot_[id];
    switch (nd.kind) {
      case NodeKind::input: d = dx[static_cast<std::size_t>(nd.input)]; break;
      case NodeKind::constant: d = 0; break;
      case NodeKind::add: d = dot_[nd.a] + dot_[nd.b]; break;
      case NodeKind::sub: d = dot_[nd.a] - dot_[nd.b]; break;
      case NodeKind::mul: d = dot_[nd.a] * value_[nd.b] + value_[nd.a] * dot_[nd.b]; break;
      case NodeKind::div: d = (dot_[nd.a] - value_[id] * dot_[nd.b]) / value_[nd.b]; break;
      case NodeKind::apply: d = d1_[id] * dot_[nd.a]; break;
      case NodeKind::branch: d = dot_[then_[id] ? nd.b : nd.c]; break;
    }
  }
}

void Evaluator::tangent(std::span<const double> dx, std::span<double> dout) {
  check_inputs(*t_, dx.size());
  forward_nodes(dx);
  for (int k = 0; k < t_->num_outputs(); ++k)
    dout[static_cast<std::size_t>(k)] = dot_[t_->outputs()[static_cast<std::size_t>(k)]];
}

void Evaluator::adjoint(int k, std::span<double> grad) {
  prepare_derivs();
  const Tape& t = *t_;
  for (int id : diff_list_) bar_[id] = 0;
  bar_[t.outputs().at(static_cast<std::size_t>(k))] = 1.0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (auto it = diff_list_.rbegin(); it != diff_list_.rend(); ++it) {
    const int id = *it;
    const Node& nd = t.node(id);
    const double w = bar_[id];
    if (w == 0) continue;
    switch (nd.kind) {
      case NodeKind::input: grad[static_cast<std::size_t>(nd.input)] += w; break;
      case NodeKind::constant: break;
      case NodeKind::add:
        bar_[nd.a] += w;
        bar_[nd.b] += w;
        break;
      case NodeKind::sub:
        bar_[nd.a] += w;
        bar_[nd.b] -= w;
        break;
      case NodeKind::mul:
        bar_[nd.a] += w * value_[nd.b];
        bar_[nd.b] += w * value_[nd.a];
        break;
      case NodeKind::div: {
        const double q = w / value_[nd.b];
        bar_[nd.a] += q;
        bar_[nd.b] -= q * value_[id];
        break;
      }
      case NodeKind::apply: bar_[nd.a] += w * d1_[id]; break;
      case NodeKind::branch: bar_[then_[id] ? nd.b : nd.c] += w; break;
    }
  }
}

Eigen::MatrixXd Evaluator::jacobian() {
  const int n = t_->num_inputs(), m = t_->num_outputs();
  Eigen::MatrixXd J(m, n);
  std::vector<double> e(static_cast<std::size_t>(n), 0.0), col(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    tangent(e, col);
    for (int i = 0; i < m; ++i) J(i, j) = col[i];
    e[j] = 0.0;
  }
  return J;
}

Eigen::MatrixXd Evaluator::hessian(int k) {
  prepare_derivs();
  const Tape& t = *t_;
  const int n = t.num_inputs();
  const int out = t.outputs().at(static_cast<std::size_t>(k));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  std::vector<double> bd(static_cast<std::size_t>(t.size()), 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    forward_nodes(e);
    e[j] = 0.0;
    for (int id : diff_list_) bar_[id] = bd[id] = 0;
    bar_[out] = 1.0;
    for (auto it = diff_list_.rbegin(); it != diff_list_.rend(); ++it) {
      const int id = *it;
      const Node& nd = t.node(id);
      const double w = bar_[id], wd = bd[id];
      if (w == 0 && wd == 0) continue;
      switch (nd.kind) {
        case NodeKind::input: H(nd.input, j) += wd; break;
        case NodeKind::constant: break;
        case NodeKind::add:
          bar_[nd.a] += w;
          bd[nd.a] += wd;
          bar_[nd.b] += w;
          bd[nd.b] += wd;
          break;
        case NodeKind::sub:
          bar_[nd.a] += w;
          bd[nd.a] += wd;
          bar_[nd.b] -= w;
          bd[nd.b] -= wd;
          break;
        case NodeKind::mul: {
          const double va = value_[nd.a], vb = value_[nd.b];
          bar_[nd.a] += w * vb;
          bd[nd.a] += wd * vb + w * dot_[nd.b];
          bar_[nd.b] += w * va;
          bd[nd.b] += wd * va + w * dot_[nd.a];
          break;
        }
        case NodeKind::div: {
          const double b = value_[nd.b], r = value_[id];
          const double db = dot_[nd.b], dr = dot_[id];
          bar_[nd.a] += w / b;
          bd[nd.a] += wd / b - w * db / (b * b);
          bar_[nd.b] -= w * r / b;
          bd[nd.b] -= wd * r / b + w * (dr / b - r * db / (b * b));
          break;
        }
        case NodeKind::apply:
          bar_[nd.a] += w * d1_[id];
          bd[nd.a] += wd * d1_[id] + w * d2_[id] * dot_[nd.a];
          break;
        case NodeKind::branch: {
          const int arm = then_[id] ? nd.b : nd.c;
          bar_[arm] += w;
          bd[arm] += wd;
          break;
        }
      }
    }
  }
  Eigen::MatrixXd S = 0.5 * (H + H.transpose());
  return S;
}

// ---------------------------------------------------------------------------

std::vector<double> tape_eval(const Tape& t, std::span<const double> x) {
  Evaluator ev(t);
  ev.run(x);
  return ev.outputs();
}

Eigen::MatrixXd forward_gradient(const Tape& t, std::span<const double> x) {
  Evaluator ev(t);
  ev.run(x);
  return ev.jacobian();
}

std::vector<double> reverse_gradient(const Tape& t, std::span<const double> x, int out) {
  if (out < 0 || out >= t.num_outputs()) throw DimensionMismatch("output index out of range");
  Evaluator ev(t);
  ev.run(x);
  std::vector<double> g(static_cast<std::size_t>(t.num_inputs()));
  ev.adjoint(out, g);
  return g;
}

Eigen::MatrixXd hessian(const Tape& t, std::span<const double> x, int out) {
  if (out < 0 || out >= t.num_outputs()) throw DimensionMismatch("output index out of range");
  Evaluator ev(t);
  ev.run(x);
  return ev.hessian(out);
}

std::vector<Jet> tape_jet_eval(const Tape& t, std::span<const Jet> x) {
  check_inputs(t, x.size());
  const int r = x.empty() ? 0 : x[0].order();
  for (const Jet& j : x)
    if (j.order() != r) throw OrderMismatch(r, j.order());
  const int n = t.size();
  std::vector<Jet> v(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> st(static_cast<std::size_t>(n), ok), then_taken(static_cast<std::size_t>(n), 0);
  std::vector<std::string> msg(static_cast<std::size_t>(n));
  for (int id = 0; id < n; ++id) {
    const Node& nd = t.node(id);
    auto bad = [&](int c) { return c >= 0 && st[c] != ok; };
    if (nd.kind == NodeKind::branch) {
      const bool take = !bad(nd.a) && compare(nd.cmp, v[nd.a][0], nd.value);
      then_taken[id] = take ? 1 : 0;
      const int arm = take ? nd.b : nd.c;
      if (bad(nd.a) || bad(arm))
        st[id] = poisoned;
      else
        v[id] = v[arm];
      continue;
    }
    if (bad(nd.a) || bad(nd.b)) {
      st[id] = poisoned;
      continue;
    }
    try {
      switch (nd.kind) {
        case NodeKind::input: v[id] = x[static_cast<std::size_t>(nd.input)]; break;
        case NodeKind::constant: v[id] = Jet::constant(nd.value, r); break;
        case NodeKind::add: v[id] = v[nd.a] + v[nd.b]; break;
        case NodeKind::sub: v[id] = v[nd.a] - v[nd.b]; break;
        case NodeKind::mul: v[id] = v[nd.a] * v[nd.b]; break;
        case NodeKind::div: v[id] = v[nd.a] / v[nd.b]; break;
        case NodeKind::apply: v[id] = jet_apply(nd.fn, v[nd.a]); break;
        case NodeKind::branch: break;
      }
    } catch (const NonDifferentiablePoint& e) {
      st[id] = nondiff;
      msg[id] = e.what();
    } catch (const Error& e) {
      st[id] = domain;
      msg[id] = e.what();
    }
  }
  std::vector<std::uint8_t> needed, diff;
  mark(t, then_taken, needed, diff);
  for (int id = 0; id < n; ++id) {
    if (!needed[id]) continue;
    if (st[id] == domain) throw EvalDomainError(id, msg[id]);
    if (st[id] == nondiff) throw NonDifferentiablePoint(id, msg[id]);
  }
  std::vector<Jet> out;
  out.reserve(t.outputs().size());
  for (int o : t.outputs()) out.push_back(v[o]);
  return out;
}

long primal_op_count(const Tape& t) {
  long s = 0;
  for (const Node& nd : t.nodes())
    if (nd.kind != NodeKind::input && nd.kind != NodeKind::constant && nd.kind != NodeKind::branch) ++s;
  return s;
}

long op_count(const Tape& t, SweepMode mode) {
  // forward: value + tangent; reverse: value + adjoint accumulation.
  long c = 0;
  for (const Node& nd : t.nodes()) {
    switch (nd.kind) {
      case NodeKind::add:
      case NodeKind::sub: c += mode == SweepMode::forward ? 2 : 3; break;
      case NodeKind::mul: c += mode == SweepMode::forward ? 4 : 5; break;
      case NodeKind::div: c += mode == SweepMode::forward ? 4 : 5; break;
      case NodeKind::apply: c += mode == SweepMode::forward ? 3 : 4; break;
      default: break;
    }
  }
  return c;
}

std::vector<BoundaryFinding> boundary_audit(const Tape& t, std::span<const double> x, double rel_tol) {
  Evaluator ev(t);
  ev.run(x);
  std::vector<BoundaryFinding> findings;
  for (int id = 0; id < t.size(); ++id) {
    const Node& nd = t.node(id);
    if (nd.kind != NodeKind::branch || !ev.active(id)) continue;
    const double c = ev.value(nd.a);
    if (std::fabs(c - nd.value) > rel_tol * std::max(1.0, std::fabs(nd.value))) continue;
    BoundaryFinding f;
    f.node = id;
    f.condition = c;
    f.threshold = nd.value;
    auto one_side = [&](bool then_arm, Eigen::MatrixXd& J, std::string& err) {
      ForcedArms forced{{id, then_arm}};
      Evaluator side(t);
      try {
        side.run(x, &forced);
        J = side.jacobian();
      } catch (const Error& e) {
        err = e.what();
      }
    };
    one_side(true, f.then_jacobian, f.then_error);
    one_side(false, f.else_jacobian, f.else_error);
    if (!f.then_error.empty() || !f.else_error.empty()) {
      f.mismatch = std::numeric_limits<double>::infinity();
    } else {
      if (f.then_jacobian.size() == 0) continue;
      f.mismatch = (f.then_jacobian - f.else_jacobian).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, f.then_jacobian.cwiseAbs().maxCoeff());
      if (f.mismatch <= 1e-12 * scale) continue;
    }
    findings.push_back(std::move(f));
  }
  return findings;
}

}  // namespace hybridad
