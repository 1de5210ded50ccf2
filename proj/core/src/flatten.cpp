#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using Signal = std::vector<Var>;

// Subsystems inlined into one graph; ids of nested blocks get a "S/" prefix.
struct Flat {
  Diagram d;
  std::map<PortRef, PortRef> alias;
};

PortRef resolve(const Flat& f, PortRef p) {
  for (int guard = 0; guard < 10000; ++guard) {
    auto it = f.alias.find(p);
    if (it == f.alias.end()) return p;
    p = it->second;
  }
  throw ValidationError({"subsystem port aliases form a cycle"});
}

void inline_into(const Diagram& d, const std::string& prefix, const std::vector<PortRef>& inputs, Flat& f) {
  for (const auto& [name, v] : d.params)
    if (!f.d.has_param(name)) f.d.params.push_back({name, v});
  auto driver_of = [&](const std::string& block, int port) -> PortRef {
    auto src = d.driver({block, port});
    if (!src) throw ValidationError({"input " + prefix + block + "." + std::to_string(port + 1) + " is not connected"});
    return {prefix + src->block, src->port};
  };
  for (const auto& b : d.blocks) {
    const std::string id = prefix + b.id;
    if (const auto* in = std::get_if<blocks::Inport>(&b.kind)) {
      if (in->index < 0 || in->index >= static_cast<int>(inputs.size()))
        throw ValidationError({"inport " + id + " has no matching subsystem input"});
      f.alias[{id, 0}] = inputs[static_cast<std::size_t>(in->index)];
    } else if (const auto* s = std::get_if<blocks::Subsystem>(&b.kind)) {
      std::vector<PortRef> ins;
      for (int i = 0; i < num_inputs(b); ++i) ins.push_back(driver_of(b.id, i));
      inline_into(*s->body, id + "/", ins, f);
      for (std::size_t k = 0; k < s->body->outputs.size(); ++k) {
        const auto& o = s->body->outputs[k].from;
        f.alias[{id, static_cast<int>(k)}] = {id + "/" + o.block, o.port};
      }
    } else {
      Block copy = b;
      copy.id = id;
      if (auto* in = std::get_if<blocks::Integrator>(&copy.kind); in && !in->gated_by.empty())
        in->gated_by = prefix + in->gated_by;
      f.d.blocks.push_back(std::move(copy));
    }
  }
  for (const auto& l : d.links) {
    const Block* to = d.find(l.to.block);
    if (!to || std::holds_alternative<blocks::Subsystem>(to->kind)) continue;
    f.d.links.push_back({{prefix + l.from.block, l.from.port}, {prefix + l.to.block, l.to.port}});
  }
}

Diagram flat_diagram(const Diagram& d) {
  Flat f;
  f.d.name = d.name;
  inline_into(d, "", {}, f);
  for (auto& l : f.d.links) l.from = resolve(f, l.from);
  for (const auto& o : d.outputs) f.d.outputs.push_back({o.name, resolve(f, o.from)});
  return f.d;
}

class Flattener {
 public:
  explicit Flattener(const Diagram& top) : d_(flat_diagram(top)) {}

  OdeModel run() {
    widths_ = signal_widths(d_);
    for (const auto& [name, v] : d_.params) {
      m_.param_names.push_back(name);
      m_.theta.push_back(v);
    }
    for (const auto& b : d_.blocks) {
      blocks_[b.id] = &b;
      allocate(b);
    }
    m_.n = static_cast<int>(m_.state_names.size());
    m_.nz = static_cast<int>(m_.discrete_names.size());
    m_.num_signals = static_cast<int>(signal_pre_.size());

    Recorder rec(m_.dynamics_inputs());
    rec_ = &rec;
    for (int j = 0; j < m_.np(); ++j) theta_.push_back(rec.input(m_.in_theta() + j));
    zero_ = rec.constant(0.0);

    // Outputs of every block, then state derivatives and updates.
    std::vector<Var> f(static_cast<std::size_t>(m_.n), zero_);
    std::vector<Var> zplus(static_cast<std::size_t>(m_.nz), zero_);
    std::vector<Var> signals(static_cast<std::size_t>(m_.num_signals), zero_);
    for (const auto& b : d_.blocks) output(b.id, 0);
    for (const auto& b : d_.blocks) derivatives(b, f, zplus, signals);

    for (const auto& v : f) rec.output(v);
    for (const auto& o : d_.outputs) {
      const Signal& s = output(o.from.block, o.from.port);
      for (std::size_t i = 0; i < s.size(); ++i) {
        m_.output_names.push_back(s.size() == 1 ? o.name : o.name + "[" + std::to_string(i + 1) + "]");
        rec.output(s[i]);
      }
    }
    for (const auto& v : signals) rec.output(v);
    for (const auto& v : zplus) rec.output(v);
    m_.dynamics = rec.build();
    rec_ = nullptr;

    build_setup();
    m_.warnings = d_.warnings;
    return std::move(m_);
  }

 private:
  Var x(int i) { return rec_->input(i); }
  Var zvar(int i) { return rec_->input(m_.in_z() + i); }
  Var t() { return rec_->input(m_.in_t()); }
  Var hit(int rate) { return rec_->input(m_.in_hits() + rate); }
  Var delayed(int k) { return rec_->input(m_.in_delay() + k); }
  Var emit(const ParamExpr& e) {
    return e.emit(*rec_, [this](const std::string& n) {
      for (std::size_t j = 0; j < m_.param_names.size(); ++j)
        if (m_.param_names[j] == n) return theta_[j];
      throw UnknownParameter(n, m_.param_names);
    });
  }

  int width(const std::string& id, int port) const {
    auto it = widths_.find({id, port});
    return it == widths_.end() ? 1 : it->second;
  }

  static std::string elem(const std::string& id, int i, int w) {
    return w == 1 ? id : id + "[" + std::to_string(i + 1) + "]";
  }

  int rate_of(double ts) {
    for (std::size_t r = 0; r < m_.rates.size(); ++r)
      if (std::abs(m_.rates[r] - ts) <= 1e-12 * ts) return static_cast<int>(r);
    m_.rates.push_back(ts);
    return static_cast<int>(m_.rates.size()) - 1;
  }

  static ExprList strip(const ExprList& p) {
    std::size_t i = 0;
    while (i + 1 < p.size() && p[i].is_zero()) ++i;
    return ExprList(p.begin() + static_cast<std::ptrdiff_t>(i), p.end());
  }

  // Per-element realization sizes.
  struct Realization {
    int first = 0;   // first continuous or discrete state
    int order = 0;   // states per element
    int hold = -1;   // first hold state (discrete only)
    int rate = -1;
    int first_signal = -1;
    int first_channel = -1;
    int slope_channel = -1;
    int slope_signal = -1;
  };

  void add_states(const std::string& id, int count, int w) {
    for (int e = 0; e < w; ++e)
      for (int k = 0; k < count; ++k)
        m_.state_names.push_back(count == 1 ? elem(id, e, w) : elem(id, e, w) + ".x" + std::to_string(k + 1));
  }
  void add_discrete(const std::string& id, int count, int w) {
    for (int e = 0; e < w; ++e)
      for (int k = 0; k < count; ++k)
        m_.discrete_names.push_back(count == 1 ? elem(id, e, w) : elem(id, e, w) + ".z" + std::to_string(k + 1));
  }

  void allocate(const Block& b) {
    using namespace blocks;
    Realization r;
    const int w = num_outputs(b) > 0 ? width(b.id, 0) : 1;
    std::visit(overloaded{
                   [&](const Integrator& in) {
                     r.first = static_cast<int>(m_.state_names.size());
                     r.order = 1;
                     add_states(b.id, 1, w);
                     for (int e = 0; e < w; ++e) init_x_.push_back(in.initial);
                     if (in.saturation)
                       for (int e = 0; e < w; ++e)
                         m_.clamps.push_back({r.first + e, in.saturation->first, in.saturation->second});
                   },
                   [&](const TransferFnS& tf) {
                     r.first = static_cast<int>(m_.state_names.size());
                     r.order = static_cast<int>(strip(tf.den).size()) - 1;
                     add_states(b.id, r.order, w);
                     init_x_.resize(init_x_.size() + static_cast<std::size_t>(r.order * w), ParamExpr(0.0));
                   },
                   [&](const StateSpaceC& ss) {
                     r.first = static_cast<int>(m_.state_names.size());
                     r.order = static_cast<int>(ss.A.size());
                     add_states(b.id, r.order, 1);
                     init_x_.resize(init_x_.size() + static_cast<std::size_t>(r.order), ParamExpr(0.0));
                   },
                   [&](const TransferFnZ& tf) {
                     r.first = static_cast<int>(m_.discrete_names.size());
                     r.order = static_cast<int>(strip(tf.den).size()) - 1;
                     r.rate = rate_of(tf.sample_time);
                     add_discrete(b.id, r.order, w);
                     init_z_.resize(init_z_.size() + static_cast<std::size_t>(r.order * w), ParamExpr(0.0));
                     r.hold = static_cast<int>(m_.discrete_names.size());
                     for (int e = 0; e < w; ++e) m_.discrete_names.push_back(elem(b.id, e, w) + ".hold");
                     init_z_.resize(init_z_.size() + static_cast<std::size_t>(w), ParamExpr(0.0));
                   },
                   [&](const StateSpaceD& ss) {
                     r.first = static_cast<int>(m_.discrete_names.size());
                     r.order = static_cast<int>(ss.A.size());
                     r.rate = rate_of(ss.sample_time);
                     add_discrete(b.id, r.order, 1);
                     init_z_.resize(init_z_.size() + static_cast<std::size_t>(r.order), ParamExpr(0.0));
                     r.hold = static_cast<int>(m_.discrete_names.size());
                     for (int e = 0; e < w; ++e) m_.discrete_names.push_back(elem(b.id, e, w) + ".hold");
                     init_z_.resize(init_z_.size() + static_cast<std::size_t>(w), ParamExpr(0.0));
                   },
                   [&](const UnitDelay& u) {
                     r.first = static_cast<int>(m_.discrete_names.size());
                     r.order = 1;
                     r.rate = rate_of(u.sample_time);
                     add_discrete(b.id, 1, w);
                     for (int e = 0; e < w; ++e) init_z_.push_back(u.initial);
                     r.hold = static_cast<int>(m_.discrete_names.size());
                     for (int e = 0; e < w; ++e) m_.discrete_names.push_back(elem(b.id, e, w) + ".hold");
                     for (int e = 0; e < w; ++e) init_z_.push_back(u.initial);
                   },
                   [&](const TransportDelay& td) {
                     r.first_signal = static_cast<int>(signal_pre_.size());
                     r.first_channel = static_cast<int>(m_.delays.size());
                     for (int e = 0; e < w; ++e) {
                       signal_pre_.push_back(td.prehistory);
                       m_.delays.push_back({r.first_signal + e, td.delay, false});
                     }
                     if (td.slope) {
                       r.slope_signal = static_cast<int>(signal_pre_.size());
                       r.slope_channel = static_cast<int>(m_.delays.size());
                       for (int e = 0; e < w; ++e) {
                         signal_pre_.push_back(ParamExpr(0.0));
                         m_.delays.push_back({r.slope_signal + e, td.delay, true});
                       }
                     }
                   },
                   [&](const auto&) {},
               },
               b.kind);
    real_[b.id] = r;
  }

  const Signal& output(const std::string& id, int port) {
    auto key = PortRef{id, port};
    if (auto it = out_.find(key); it != out_.end()) return it->second;
    const Block& b = *blocks_.at(id);
    if (visiting_.count(id)) throw ValidationError({"algebraic loop through " + id});
    visiting_.insert(id);
    compute(b);
    visiting_.erase(id);
    return out_.at(key);
  }

  Signal input(const Block& b, int i) {
    auto src = d_.driver({b.id, i});
    if (!src) throw ValidationError({"input " + b.id + "." + std::to_string(i + 1) + " is not connected"});
    return output(src->block, src->port);
  }

  Var broadcast(const Signal& s, std::size_t i) const { return s.size() == 1 ? s[0] : s[i]; }

  Var lookup_value(const std::vector<double>& xs, const std::vector<double>& ys, Var u) {
    Recorder& r = *rec_;
    const std::size_t n = xs.size();
    Var result = r.constant(ys[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) {
      const double slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
      Var seg = r.constant(ys[i]) + slope * (u - xs[i]);
      result = select(u, Cmp::ge, xs[i + 1], result, seg);
    }
    return select(u, Cmp::ge, xs[0], result, r.constant(ys[0]));
  }

  Var piecewise_constant(const std::vector<double>& xs, const std::vector<double>& vals, double below, double above,
                         Var u) {
    Recorder& r = *rec_;
    const std::size_t n = xs.size();
    Var result = r.constant(above);
    for (std::size_t i = n - 1; i-- > 0;) result = select(u, Cmp::ge, xs[i + 1], result, r.constant(vals[i]));
    return select(u, Cmp::ge, xs[0], result, r.constant(below));
  }

  void compute(const Block& b) {
    using namespace blocks;
    Recorder& R = *rec_;
    const int w = num_outputs(b) > 0 ? width(b.id, 0) : 1;
    const Realization& re = real_.at(b.id);
    auto set = [&](int port, Signal s) { out_[{b.id, port}] = std::move(s); };
    auto each = [&](const Signal& u, const std::function<Var(Var)>& fn) {
      Signal y;
      for (const auto& v : u) y.push_back(fn(v));
      return y;
    };
    std::visit(
        overloaded{
            [&](const Gain& g) {
              Var k = emit(g.k);
              set(0, each(input(b, 0), [&](Var v) { return k * v; }));
            },
            [&](const Sum& s) {
              Signal y(static_cast<std::size_t>(w), zero_);
              for (std::size_t i = 0; i < s.signs.size(); ++i) {
                Signal u = input(b, static_cast<int>(i));
                for (std::size_t e = 0; e < y.size(); ++e)
                  y[e] = s.signs[i] == '+' ? y[e] + broadcast(u, e) : y[e] - broadcast(u, e);
              }
              set(0, y);
            },
            [&](const Product& p) {
              Signal y(static_cast<std::size_t>(w), R.constant(1.0));
              for (std::size_t i = 0; i < p.ops.size(); ++i) {
                Signal u = input(b, static_cast<int>(i));
                for (std::size_t e = 0; e < y.size(); ++e)
                  y[e] = p.ops[i] == '*' ? y[e] * broadcast(u, e) : y[e] / broadcast(u, e);
              }
              set(0, y);
            },
            [&](const Integrator&) {
              Signal y;
              for (int e = 0; e < w; ++e) y.push_back(x(re.first + e));
              set(0, y);
            },
            [&](const TransferFnS& tf) { set(0, tf_output(b, tf.num, tf.den, re, false)); },
            [&](const TransferFnZ& tf) { set(0, tf_output(b, tf.num, tf.den, re, true)); },
            [&](const StateSpaceC& ss) { set(0, ss_output(b, ss.C, ss.D, re, false)); },
            [&](const StateSpaceD& ss) { set(0, ss_output(b, ss.C, ss.D, re, true)); },
            [&](const Fn& fn) { set(0, each(input(b, 0), [&](Var v) { return R.apply(fn.fn, v); })); },
            [&](const Switch& s) {
              Signal a = input(b, 0), c = input(b, 1), e = input(b, 2);
              Signal y;
              for (int i = 0; i < w; ++i) {
                auto k = static_cast<std::size_t>(i);
                y.push_back(select(broadcast(c, k), Cmp::ge, s.threshold, broadcast(a, k), broadcast(e, k)));
              }
              set(0, y);
            },
            [&](const Saturation& s) {
              set(0, each(input(b, 0), [&](Var u) {
                    return select(u, Cmp::ge, s.lo, select(u, Cmp::ge, s.hi, R.constant(s.hi), u), R.constant(s.lo));
                  }));
            },
            [&](const SaturationDynamic&) {
              Signal up = input(b, 0), u = input(b, 1), lo = input(b, 2);
              Signal y;
              for (int i = 0; i < w; ++i) {
                auto k = static_cast<std::size_t>(i);
                Var uu = u[k], hi = broadcast(up, k), low = broadcast(lo, k);
                y.push_back(select(uu - hi, Cmp::ge, 0.0, hi, select(low - uu, Cmp::ge, 0.0, low, uu)));
              }
              set(0, y);
            },
            [&](const LookupTable1D& l) { set(0, each(input(b, 0), [&](Var u) { return lookup_value(l.x, l.y, u); })); },
            [&](const LookupDerivative1D& l) {
              Signal u = input(b, 0), du = input(b, 1);
              const std::size_t n = l.x.size();
              Signal y;
              for (int i = 0; i < w; ++i) {
                auto k = static_cast<std::size_t>(i);
                Var uu = broadcast(u, k);
                Var slope;
                if (l.mode == LookupDerivative1D::Mode::slope) {
                  std::vector<double> s(n - 1);
                  for (std::size_t j = 0; j + 1 < n; ++j) s[j] = (l.y[j + 1] - l.y[j]) / (l.x[j + 1] - l.x[j]);
                  slope = piecewise_constant(l.x, s, 0.0, 0.0, uu);
                } else {
                  std::vector<double> eta(n - 1);
                  for (std::size_t j = 0; j + 1 < n; ++j) eta[j] = l.x[j + 1] - l.x[j];
                  Var h = piecewise_constant(l.x, eta, eta.front(), eta.back(), uu);
                  if (l.central)
                    slope = (lookup_value(l.x, l.y, uu + h) - lookup_value(l.x, l.y, uu - h)) / (2.0 * h);
                  else
                    slope = (lookup_value(l.x, l.y, uu + h) - lookup_value(l.x, l.y, uu)) / h;
                }
                y.push_back(slope * du[k]);
              }
              set(0, y);
            },
            [&](const Constant& c) {
              Signal y;
              for (const auto& e : c.value) y.push_back(emit(e));
              set(0, y);
            },
            [&](const Step& s) { set(0, {select(t(), Cmp::ge, s.time, emit(s.level), emit(s.initial))}); },
            [&](const TransportDelay& td) {
              Signal y;
              Var slope = td.slope ? emit(*td.slope) : zero_;
              for (int e = 0; e < w; ++e) {
                Var v = delayed(re.first_channel + e);
                if (td.slope) v = v - slope * delayed(re.slope_channel + e);
                y.push_back(v);
              }
              set(0, y);
            },
            [&](const Mux& m) {
              Signal y;
              for (int i = 0; i < m.n; ++i) {
                Signal u = input(b, i);
                y.insert(y.end(), u.begin(), u.end());
              }
              set(0, y);
            },
            [&](const Demux& m) {
              Signal u = input(b, 0);
              const std::size_t part = u.size() / static_cast<std::size_t>(m.n);
              for (int k = 0; k < m.n; ++k)
                set(k, Signal(u.begin() + static_cast<std::ptrdiff_t>(k * part),
                              u.begin() + static_cast<std::ptrdiff_t>((k + 1) * part)));
            },
            [&](const UnitDelay&) {
              Signal y;
              for (int e = 0; e < w; ++e) {
                Var fresh = zvar(re.first + e);
                y.push_back(select(hit(re.rate), Cmp::ge, 0.5, fresh, zvar(re.hold + e)));
              }
              set(0, y);
            },
            [&](const auto&) { throw ValidationError({"block " + b.id + " cannot be flattened"}); },
        },
        b.kind);
  }

  // Controllable canonical form, normalized by the leading denominator
  // coefficient. Element e uses states first + e*order ...
  struct TfCoeffs {
    std::vector<Var> a;  // a[1..n]
    std::vector<Var> c;  // output weights for x_{n+1-i}, i = 1..n
    Var d;
  };
  TfCoeffs tf_coeffs(const ExprList& num_in, const ExprList& den_in) {
    ExprList den = strip(den_in), num = strip(num_in);
    const std::size_t n = den.size() - 1;
    ExprList b(n + 1, ParamExpr(0.0));
    for (std::size_t i = 0; i < num.size() && i <= n; ++i) b[n + 1 - num.size() + i] = num[i];
    Var a0 = emit(den[0]);
    TfCoeffs c;
    c.a.push_back(zero_);
    for (std::size_t i = 1; i <= n; ++i) c.a.push_back(emit(den[i]) / a0);
    c.d = emit(b[0]) / a0;
    c.c.push_back(zero_);
    for (std::size_t i = 1; i <= n; ++i) c.c.push_back(emit(b[i]) / a0 - c.a[i] * c.d);
    return c;
  }

  Signal tf_output(const Block& b, const ExprList& num, const ExprList& den, const Realization& re, bool discrete) {
    TfCoeffs c = tf_coeffs(num, den);
    const int n = re.order;
    const int w = width(b.id, 0);
    const bool feed = !c.d.valid() || !rec_->is_zero(c.d);
    Signal u;
    if (feed && (has_feedthrough(b))) u = input(b, 0);
    Signal y;
    for (int e = 0; e < w; ++e) {
      auto state = [&](int k) { return discrete ? zvar(re.first + e * n + k) : x(re.first + e * n + k); };
      Var v = zero_;
      for (int i = 1; i <= n; ++i) v = v + c.c[static_cast<std::size_t>(i)] * state(n - i);
      if (!u.empty()) v = v + c.d * broadcast(u, static_cast<std::size_t>(e));
      if (discrete) v = select(hit(re.rate), Cmp::ge, 0.5, v, zvar(re.hold + e));
      y.push_back(v);
    }
    return y;
  }

  Signal ss_output(const Block& b, const ExprMatrix& C, const ExprMatrix& D, const Realization& re, bool discrete) {
    const int w = width(b.id, 0);
    const bool feed = has_feedthrough(b);
    Signal u = feed ? input(b, 0) : Signal{};
    Signal y;
    for (int i = 0; i < w; ++i) {
      Var v = zero_;
      if (!C.empty())
        for (int k = 0; k < re.order; ++k)
          v = v + emit(C[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]) *
                      (discrete ? zvar(re.first + k) : x(re.first + k));
      if (feed && !D.empty())
        for (std::size_t j = 0; j < u.size(); ++j) v = v + emit(D[static_cast<std::size_t>(i)][j]) * u[j];
      if (discrete) v = select(hit(re.rate), Cmp::ge, 0.5, v, zvar(re.hold + i));
      y.push_back(v);
    }
    return y;
  }

  // Saturated integrators stop when pinned and pushed outward.
  Var gate(Var state, Var push, const std::pair<double, double>& sat, Var value) {
    Var upper = select(push, Cmp::gt, 0.0, zero_, value);
    Var lower = select(push, Cmp::lt, 0.0, zero_, value);
    return select(state, Cmp::ge, sat.second, upper, select(state, Cmp::le, sat.first, lower, value));
  }

  void derivatives(const Block& b, std::vector<Var>& f, std::vector<Var>& zplus, std::vector<Var>& signals) {
    using namespace blocks;
    const Realization& re = real_.at(b.id);
    const int w = num_outputs(b) > 0 ? width(b.id, 0) : 1;
    auto fi = [&](int i) -> Var& { return f[static_cast<std::size_t>(i)]; };
    auto zi = [&](int i) -> Var& { return zplus[static_cast<std::size_t>(i)]; };
    std::visit(
        overloaded{
            [&](const Integrator& in) {
              Signal u = input(b, 0);
              const Block* g = in.gated_by.empty() ? nullptr : blocks_.at(in.gated_by);
              for (int e = 0; e < w; ++e) {
                Var v = broadcast(u, static_cast<std::size_t>(e));
                if (in.saturation) v = gate(x(re.first + e), v, *in.saturation, v);
                if (g) {
                  const auto& gi = std::get<Integrator>(g->kind);
                  const Realization& gr = real_.at(g->id);
                  Signal gu = input(*g, 0);
                  v = gate(x(gr.first + e), broadcast(gu, static_cast<std::size_t>(e)), *gi.saturation, v);
                }
                fi(re.first + e) = v;
              }
            },
            [&](const TransferFnS& tf) { tf_update(b, tf.num, tf.den, re, f, false); },
            [&](const TransferFnZ& tf) { tf_update(b, tf.num, tf.den, re, zplus, true); },
            [&](const StateSpaceC& ss) { ss_update(b, ss.A, ss.B, re, f, false); },
            [&](const StateSpaceD& ss) { ss_update(b, ss.A, ss.B, re, zplus, true); },
            [&](const UnitDelay&) {
              Signal u = input(b, 0);
              const Signal& y = output(b.id, 0);
              for (int e = 0; e < w; ++e) {
                zi(re.first + e) = select(hit(re.rate), Cmp::ge, 0.5, broadcast(u, static_cast<std::size_t>(e)),
                                          zvar(re.first + e));
                zi(re.hold + e) = y[static_cast<std::size_t>(e)];
              }
            },
            [&](const TransportDelay& td) {
              Signal u = input(b, 0);
              for (int e = 0; e < w; ++e)
                signals[static_cast<std::size_t>(re.first_signal + e)] = broadcast(u, static_cast<std::size_t>(e));
              if (td.slope) {
                Signal u2 = input(b, 1);
                for (int e = 0; e < w; ++e)
                  signals[static_cast<std::size_t>(re.slope_signal + e)] = broadcast(u2, static_cast<std::size_t>(e));
              }
            },
            [&](const auto&) {},
        },
        b.kind);
  }

  void tf_update(const Block& b, const ExprList& num, const ExprList& den, const Realization& re,
                 std::vector<Var>& target, bool discrete) {
    TfCoeffs c = tf_coeffs(num, den);
    const int n = re.order;
    const int w = width(b.id, 0);
    Signal u = input(b, 0);
    const Signal& y = output(b.id, 0);
    for (int e = 0; e < w; ++e) {
      auto state = [&](int k) { return discrete ? zvar(re.first + e * n + k) : x(re.first + e * n + k); };
      for (int k = 0; k < n; ++k) {
        Var v;
        if (k + 1 < n) {
          v = state(k + 1);
        } else {
          v = broadcast(u, static_cast<std::size_t>(e));
          for (int i = 1; i <= n; ++i) v = v - c.a[static_cast<std::size_t>(i)] * state(n - i);
        }
        if (discrete) v = select(hit(re.rate), Cmp::ge, 0.5, v, state(k));
        target[static_cast<std::size_t>(re.first + e * n + k)] = v;
      }
      if (discrete) target[static_cast<std::size_t>(re.hold + e)] = y[static_cast<std::size_t>(e)];
    }
  }

  void ss_update(const Block& b, const ExprMatrix& A, const ExprMatrix& B, const Realization& re,
                 std::vector<Var>& target, bool discrete) {
    Signal u = input(b, 0);
    for (int i = 0; i < re.order; ++i) {
      auto state = [&](int k) { return discrete ? zvar(re.first + k) : x(re.first + k); };
      Var v = zero_;
      for (int k = 0; k < re.order; ++k)
        v = v + emit(A[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]) * state(k);
      for (std::size_t j = 0; j < u.size() && !B.empty(); ++j) v = v + emit(B[static_cast<std::size_t>(i)][j]) * u[j];
      if (discrete) v = select(hit(re.rate), Cmp::ge, 0.5, v, state(i));
      target[static_cast<std::size_t>(re.first + i)] = v;
    }
    if (discrete) {
      const Signal& y = output(b.id, 0);
      for (std::size_t e = 0; e < y.size(); ++e) target[static_cast<std::size_t>(re.hold) + e] = y[e];
    }
  }

  void build_setup() {
    Recorder rec(m_.np());
    std::vector<Var> th;
    for (int j = 0; j < m_.np(); ++j) th.push_back(rec.input(j));
    auto bind = [&](const std::string& n) {
      for (std::size_t j = 0; j < m_.param_names.size(); ++j)
        if (m_.param_names[j] == n) return th[j];
      throw UnknownParameter(n, m_.param_names);
    };
    for (const auto& e : init_x_) rec.output(e.emit(rec, bind));
    for (const auto& e : init_z_) rec.output(e.emit(rec, bind));
    rec.output(rec.constant(0.0));
    for (const auto& e : signal_pre_) rec.output(e.emit(rec, bind));
    m_.setup = rec.build();
  }

  Diagram d_;
  OdeModel m_;
  std::map<PortRef, int> widths_;
  std::map<std::string, const Block*> blocks_;
  std::map<std::string, Realization> real_;
  std::map<PortRef, Signal> out_;
  std::set<std::string> visiting_;
  std::vector<ParamExpr> init_x_, init_z_, signal_pre_;
  Recorder* rec_ = nullptr;
  std::vector<Var> theta_;
  Var zero_;
};

}  // namespace

OdeModel flatten(const Diagram& d) {
  require_valid(d);
  return Flattener(d).run();
}

}  // namespace hybridad
