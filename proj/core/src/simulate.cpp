#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

namespace {

// Signal samples at increasing times. Two nodes may share a time (values
// just before and after an event); lookups at that time use the later one.
class History {
 public:
  History(int signals, std::vector<double> prehistory) : ns_(signals), pre_(std::move(prehistory)) {}

  void push(double t, std::span<const double> v, std::span<const double> s) {
    t_.push_back(t);
    v_.insert(v_.end(), v.begin(), v.end());
    s_.insert(s_.end(), s.begin(), s.end());
  }

  bool empty() const { return t_.empty(); }
  double last_time() const { return t_.back(); }
  double last_value(int sig) const { return v_[idx(t_.size() - 1, sig)]; }

  // Value (or time derivative) of `sig` at tau. Inside a step, `anchor`
  // (the step midpoint shifted by the delay) picks the segment, so a step
  // whose delayed window ends on a node does not see the next segment.
  double read(int sig, double tau, bool derivative, std::optional<double> anchor = {}) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(tau));
    if (t_.empty() || tau < t_.front() || (anchor && *anchor < t_.front() && tau <= t_.front() + tol))
      return derivative ? 0.0 : pre_[static_cast<std::size_t>(sig)];
    if (tau > t_.back() + tol) throw DelayUnderflow(tau, t_.back());
    auto it = std::upper_bound(t_.begin(), t_.end(), tau);
    if (anchor && it != t_.begin() && tau >= *(it - 1) - tol && tau <= *(it - 1) + tol) {
      auto ia = std::upper_bound(t_.begin(), t_.end(), *anchor);
      if (ia != t_.begin() && ia != t_.end()) it = ia;
    }
    if (it == t_.end()) {
      std::size_t k = t_.size() - 1;
      return derivative ? s_[idx(k, sig)] : v_[idx(k, sig)];
    }
    std::size_t k1 = static_cast<std::size_t>(it - t_.begin());
    std::size_t k0 = k1 - 1;
    const double h = t_[k1] - t_[k0];
    const double u = (tau - t_[k0]) / h;
    const double v0 = v_[idx(k0, sig)], v1 = v_[idx(k1, sig)];
    const double m0 = s_[idx(k0, sig)], m1 = s_[idx(k1, sig)];
    if (derivative) {
      return ((6 * u * u - 6 * u) * v0 + (-6 * u * u + 6 * u) * v1) / h + (3 * u * u - 4 * u + 1) * m0 +
             (3 * u * u - 2 * u) * m1;
    }
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * v0 + (u3 - 2 * u2 + u) * h * m0 + (-2 * u3 + 3 * u2) * v1 + (u3 - u2) * h * m1;
  }

 private:
  std::size_t idx(std::size_t k, int sig) const { return k * static_cast<std::size_t>(ns_) + static_cast<std::size_t>(sig); }
  int ns_;
  std::vector<double> pre_;
  std::vector<double> t_, v_, s_;
};

int side(double g) { return g > 0 ? 1 : (g < 0 ? -1 : 0); }

class Simulator {
 public:
  Simulator(const OdeModel& m, const SimConfig& c)
      : m_(m), c_(c), dyn_(m.dynamics), hist_(m.num_signals, {}), in_(static_cast<std::size_t>(m.dynamics_inputs()), 0.0) {
    check_config(c);
    auto pv = m.param_values();
    for (const auto& ch : m.delays) {
      double h = ch.delay.eval(pv);
      if (!(h >= 0)) throw Error("delay must be nonnegative, got " + std::to_string(h));
      h_.push_back(h);
    }
    auto s = tape_eval(m.setup, m.theta);
    const auto n = static_cast<std::size_t>(m.n), nz = static_cast<std::size_t>(m.nz);
    x0_.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
    z_.assign(s.begin() + static_cast<std::ptrdiff_t>(n), s.begin() + static_cast<std::ptrdiff_t>(n + nz));
    t_start_ = m.has_start ? s[n + nz] : c.t0;
    std::vector<double> pre(s.begin() + static_cast<std::ptrdiff_t>(n + nz + 1), s.end());
    hist_ = History(m.num_signals, std::move(pre));
    hits_.assign(m.rates.size(), 0.0);
    dead_.reserve(m.events.size());
    for (const auto& e : m.events) dead_.push_back(e.deadtime >= 0 ? e.deadtime : (c.deadtime >= 0 ? c.deadtime : 2 * c.step));
    last_event_.assign(m.events.size(), -std::numeric_limits<double>::infinity());
  }

  Trajectory run() {
    Trajectory tr;
    tr.state_names = m_.state_names;
    tr.state_names.insert(tr.state_names.end(), m_.discrete_names.begin(), m_.discrete_names.end());
    tr.output_names = m_.output_names;
    if (!(c_.tf > t_start_)) throw Error("tf must exceed the start time");

    const double tol = 1e-9 * c_.step;
    std::vector<double> x = x0_;
    double t = t_start_;
    std::vector<long> next_hit(m_.rates.size(), 0);
    long grid = 0;
    auto hit_time = [&](std::size_t r) { return t_start_ + static_cast<double>(next_hit[r]) * m_.rates[r]; };

    apply_hits(x, t, next_hit, tol);
    record(tr, x, t);

    while (t < c_.tf - tol) {
      const double t_grid = t_start_ + static_cast<double>(grid + 1) * c_.step;
      double next = std::min(t_grid, c_.tf);
      for (std::size_t r = 0; r < m_.rates.size(); ++r) next = std::min(next, hit_time(r));
      advance(tr, x, t, next);
      if (std::abs(next - t_grid) <= tol) ++grid;
      t = next;
      apply_hits(x, t, next_hit, tol);
      record(tr, x, t);
    }
    return tr;
  }

 private:
  // Fires the rates whose next sampling instant is t.
  void apply_hits(const std::vector<double>& x, double t, std::vector<long>& next_hit, double tol) {
    bool any = false;
    for (std::size_t r = 0; r < m_.rates.size(); ++r) {
      const double th = t_start_ + static_cast<double>(next_hit[r]) * m_.rates[r];
      hits_[r] = std::abs(th - t) <= tol ? 1.0 : 0.0;
      if (hits_[r] != 0) {
        any = true;
        ++next_hit[r];
      }
    }
    if (!any) return;
    eval(x, t);
    const int zoff = m_.n + m_.ny() + m_.num_signals;
    for (int i = 0; i < m_.nz; ++i) z_[static_cast<std::size_t>(i)] = dyn_.output(zoff + i);
    std::fill(hits_.begin(), hits_.end(), 0.0);
  }

  void eval(std::span<const double> x, double t) {
    std::copy(x.begin(), x.end(), in_.begin());
    in_[static_cast<std::size_t>(m_.in_t())] = t;
    std::copy(m_.theta.begin(), m_.theta.end(), in_.begin() + m_.in_theta());
    for (std::size_t c = 0; c < m_.delays.size(); ++c) {
      const auto& ch = m_.delays[c];
      std::optional<double> anchor;
      if (step_mid_) anchor = *step_mid_ - h_[c];
      in_[static_cast<std::size_t>(m_.in_delay()) + c] = hist_.read(ch.signal, t - h_[c], ch.derivative, anchor);
    }
    std::copy(z_.begin(), z_.end(), in_.begin() + m_.in_z());
    std::copy(hits_.begin(), hits_.end(), in_.begin() + m_.in_hits());
    try {
      dyn_.run(in_);
    } catch (const EvalDomainError& e) {
      std::ostringstream os;
      os << e.what() << " at t=" << t;
      throw EvalDomainError(e.node(), os.str());
    }
  }

  std::vector<double> rhs(std::span<const double> x, double t) {
    eval(x, t);
    std::vector<double> f(static_cast<std::size_t>(m_.n));
    for (int i = 0; i < m_.n; ++i) f[static_cast<std::size_t>(i)] = dyn_.output(i);
    return f;
  }

  std::vector<double> step(const std::vector<double>& x, double t, double dt) {
    const std::size_t n = x.size();
    std::vector<double> out(n), tmp(n);
    step_mid_ = t + 0.5 * dt;
    if (c_.method == Method::midpoint) {
      auto k1 = rhs(x, t);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
      auto k2 = rhs(tmp, t + 0.5 * dt);
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + dt * k2[i];
    } else {
      auto k1 = rhs(x, t);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
      auto k2 = rhs(tmp, t + 0.5 * dt);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
      auto k3 = rhs(tmp, t + 0.5 * dt);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
      auto k4 = rhs(tmp, t + dt);
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
    step_mid_.reset();
    for (const auto& cl : m_.clamps) {
      auto& v = out[static_cast<std::size_t>(cl.state)];
      v = std::clamp(v, cl.lo, cl.hi);
    }
    return out;
  }

  double guard(std::size_t e, std::span<const double> x, double t) {
    std::vector<double> in(x.begin(), x.end());
    in.push_back(t);
    in.insert(in.end(), m_.theta.begin(), m_.theta.end());
    return tape_eval(m_.events[e].guard, in)[0];
  }

  // Integrates from t to t_end, handling the events inside.
  void advance(Trajectory& tr, std::vector<double>& x, double t, double t_end) {
    int count = 0;
    while (t < t_end) {
      const double dt = t_end - t;
      auto xb = step(x, t, dt);
      std::size_t hit = m_.events.size();
      double s_hit = dt;
      std::vector<double> x_hit;
      for (std::size_t e = 0; e < m_.events.size(); ++e) {
        if (t - last_event_[e] < dead_[e] - 1e-12 * c_.step) continue;
        const double ga = guard(e, x, t);
        const double gb = guard(e, xb, t_end);
        if (side(ga) == 0 || side(gb) == side(ga)) continue;
        auto [s, xs] = localize(e, x, t, dt, ga, gb);
        if (hit == m_.events.size() || s < s_hit) {
          hit = e;
          s_hit = s;
          x_hit = std::move(xs);
        }
      }
      if (hit == m_.events.size()) {
        x = std::move(xb);
        return;
      }
      if (++count > c_.max_events_per_step) throw EventStorm(t + s_hit, count);
      const double ts = t + s_hit;
      x = fire(tr, hit, x_hit, ts);
      last_event_[hit] = ts;
      t = ts;
    }
  }

  // Illinois false position on the partial step length; returns the
  // post-crossing end of the final bracket.
  std::pair<double, std::vector<double>> localize(std::size_t e, const std::vector<double>& x, double t, double dt,
                                                  double ga, double gb) {
    double lo = 0, hi = dt, flo = ga, fhi = gb;
    const int sa = side(ga);
    int last = 0;
    bool bisect = false;
    for (int it = 0; it < 400 && hi - lo > c_.event_tol; ++it) {
      double s = bisect ? 0.5 * (lo + hi) : (lo * fhi - hi * flo) / (fhi - flo);
      if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
      const double width = hi - lo;
      const double g = guard(e, step(x, t, s), t + s);
      if (side(g) == sa) {
        lo = s;
        flo = g;
        if (last == -1) fhi *= 0.5;
        last = -1;
      } else {
        hi = s;
        fhi = g;
        if (last == 1) flo *= 0.5;
        last = 1;
      }
      bisect = hi - lo > 0.5 * width;
    }
    return {hi, step(x, t, hi)};
  }

  std::vector<double> fire(Trajectory& tr, std::size_t e, const std::vector<double>& pre, double t) {
    const auto& ev = m_.events[e];
    EventRecord rec;
    rec.t = t;
    rec.event = static_cast<int>(e);
    rec.pre = pre;
    rec.z = z_;
    std::vector<double> post;
    if (const auto* reset = std::get_if<ResetAction>(&ev.action)) {
      if (m_.sensitivity) throw SensitivityAcrossEvent(t);
      std::vector<double> in = pre;
      in.push_back(t);
      in.insert(in.end(), m_.theta.begin(), m_.theta.end());
      post = tape_eval(reset->map, in);
    } else {
      const auto& s = std::get<ImpactSurface>(ev.action);
      std::vector<double> q, v;
      for (int i : s.q) q.push_back(pre[static_cast<std::size_t>(i)]);
      for (int i : s.v) v.push_back(pre[static_cast<std::size_t>(i)]);
      auto r = impact_update(s, q, v, t, m_.theta);
      rec.rebound = r.rebound;
      post = pre;
      for (std::size_t i = 0; i < s.v.size(); ++i) post[static_cast<std::size_t>(s.v[i])] = r.v(static_cast<Eigen::Index>(i));
      if (m_.sensitivity) jump_sensitivities(e, s, pre, post, t);
    }
    rec.y_pre = node(pre, t);
    rec.post = post;
    rec.y_post = node(post, t);
    tr.events.push_back(std::move(rec));
    return post;
  }

  // Sensitivity jump at an impact:
  //   tau_th = -(g_x X + g_th) / (g_x f- + g_t)
  //   X+ = Phi_x X + Phi_th + (Phi_x f- + Phi_t - f+) tau_th
  void jump_sensitivities(std::size_t e, const ImpactSurface& s, const std::vector<double>& pre, std::vector<double>& post,
                          double t) {
    const auto& L = *m_.sensitivity;
    const int nb = L.base_n, np = m_.np();
    auto& map = impact_maps_[e];
    if (!map) map = impact_map_tape(s, nb, np);
    std::vector<double> in(pre.begin(), pre.begin() + nb);
    in.push_back(t);
    in.insert(in.end(), m_.theta.begin(), m_.theta.end());
    Eigen::MatrixXd phi = forward_gradient(*map, in);

    std::vector<double> gin = pre;
    gin.push_back(t);
    gin.insert(gin.end(), m_.theta.begin(), m_.theta.end());
    Eigen::MatrixXd g = forward_gradient(m_.events[e].guard, gin);

    auto f_pre = rhs(pre, t);
    auto f_post = rhs(post, t);
    Eigen::VectorXd fm(nb), fp(nb), gx(nb);
    for (int i = 0; i < nb; ++i) {
      fm(i) = f_pre[static_cast<std::size_t>(i)];
      fp(i) = f_post[static_cast<std::size_t>(i)];
      gx(i) = g(0, i);
    }
    const double gt = g(0, m_.n);
    const double rate = gx.dot(fm) + gt;
    if (rate == 0) throw NonTransversal(rate);
    Eigen::MatrixXd phix = phi.leftCols(nb);
    Eigen::VectorXd drift = phix * fm + phi.col(nb) - fp;
    for (std::size_t k = 0; k < L.params.size(); ++k) {
      const int p = L.params[k];
      const auto off = static_cast<Eigen::Index>(nb) * static_cast<Eigen::Index>(1 + k);
      Eigen::VectorXd X = Eigen::Map<const Eigen::VectorXd>(pre.data() + off, nb);
      const double tau = -(gx.dot(X) + g(0, m_.n + 1 + p)) / rate;
      Eigen::VectorXd Xp = phix * X + phi.col(nb + 1 + p) + drift * tau;
      for (int i = 0; i < nb; ++i) post[static_cast<std::size_t>(off + i)] = Xp(i);
    }
  }

  // Evaluates at (x, t) with hits off, appends a history node and returns
  // the outputs.
  std::vector<double> node(const std::vector<double>& x, double t) {
    eval(x, t);
    std::vector<double> y(static_cast<std::size_t>(m_.ny()));
    for (int j = 0; j < m_.ny(); ++j) y[static_cast<std::size_t>(j)] = dyn_.output(m_.n + j);
    if (m_.num_signals > 0) push_history(t);
    return y;
  }

  void push_history(double t) {
    const int ns = m_.num_signals, off = m_.n + m_.ny();
    std::vector<double> v(static_cast<std::size_t>(ns)), s(static_cast<std::size_t>(ns));
    for (int k = 0; k < ns; ++k) v[static_cast<std::size_t>(k)] = dyn_.output(off + k);
    std::vector<double> dx(in_.size(), 0.0), dout(static_cast<std::size_t>(dyn_.tape().num_outputs()));
    for (int i = 0; i < m_.n; ++i) dx[static_cast<std::size_t>(i)] = dyn_.output(i);
    dx[static_cast<std::size_t>(m_.in_t())] = 1.0;
    for (std::size_t c = 0; c < m_.delays.size(); ++c) {
      const auto& ch = m_.delays[c];
      if (!ch.derivative) dx[static_cast<std::size_t>(m_.in_delay()) + c] = hist_.read(ch.signal, t - h_[c], true);
    }
    try {
      dyn_.tangent(dx, dout);
      for (int k = 0; k < ns; ++k) s[static_cast<std::size_t>(k)] = dout[static_cast<std::size_t>(off + k)];
    } catch (const NonDifferentiablePoint&) {
      for (int k = 0; k < ns; ++k)
        s[static_cast<std::size_t>(k)] = hist_.empty() || t <= hist_.last_time()
                                             ? 0.0
                                             : (v[static_cast<std::size_t>(k)] - hist_.last_value(k)) / (t - hist_.last_time());
    }
    hist_.push(t, v, s);
  }

  void record(Trajectory& tr, const std::vector<double>& x, double t) {
    auto y = node(x, t);
    std::vector<double> row = x;
    row.insert(row.end(), z_.begin(), z_.end());
    tr.t.push_back(t);
    tr.x.push_back(std::move(row));
    tr.y.push_back(std::move(y));
  }

  const OdeModel& m_;
  SimConfig c_;
  Evaluator dyn_;
  History hist_;
  std::vector<double> in_;
  std::vector<double> h_;
  std::vector<double> x0_, z_, hits_;
  double t_start_ = 0;
  std::optional<double> step_mid_;
  std::vector<double> dead_, last_event_;
  std::map<std::size_t, std::optional<Tape>> impact_maps_;
};

}  // namespace

Trajectory integrate(const OdeModel& m, const SimConfig& c) { return Simulator(m, c).run(); }

int Trajectory::output_column(const std::string& name) const {
  for (std::size_t i = 0; i < output_names.size(); ++i)
    if (output_names[i] == name) return static_cast<int>(i);
  throw Error("trajectory has no output '" + name + "'");
}

int Trajectory::state_column(const std::string& name) const {
  for (std::size_t i = 0; i < state_names.size(); ++i)
    if (state_names[i] == name) return static_cast<int>(i);
  throw Error("trajectory has no state '" + name + "'");
}

std::vector<double> Trajectory::output(const std::string& name) const {
  const auto k = static_cast<std::size_t>(output_column(name));
  std::vector<double> out;
  for (const auto& row : y) out.push_back(row[k]);
  return out;
}

std::vector<double> Trajectory::state(const std::string& name) const {
  const auto k = static_cast<std::size_t>(state_column(name));
  std::vector<double> out;
  for (const auto& row : x) out.push_back(row[k]);
  return out;
}

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void put_row(std::string& out, double t, const std::vector<double>& a, const std::vector<double>& b,
             const std::vector<double>& c) {
  put(out, t);
  for (const auto* part : {&a, &b, &c})
    for (double v : *part) {
      out += ',';
      put(out, v);
    }
  out += '\n';
}

}  // namespace

std::string Trajectory::to_csv() const {
  std::string out = "t";
  for (const auto& n : state_names) out += "," + n;
  for (const auto& n : output_names) out += "," + n;
  out += '\n';
  const std::vector<double> none;
  std::size_t e = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (; e < events.size() && events[e].t < t[i]; ++e) {
      put_row(out, events[e].t, events[e].pre, events[e].z, events[e].y_pre);
      put_row(out, events[e].t, events[e].post, events[e].z, events[e].y_post);
    }
    put_row(out, t[i], x[i], none, y[i]);
  }
  for (; e < events.size(); ++e) {
    put_row(out, events[e].t, events[e].pre, events[e].z, events[e].y_pre);
    put_row(out, events[e].t, events[e].post, events[e].z, events[e].y_post);
  }
  return out;
}

}  // namespace hybridad
