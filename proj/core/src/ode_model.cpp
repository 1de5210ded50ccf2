#include <cmath>
#include <numbers>

#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

Method parse_method(std::string_view s) {
  if (s == "rk4") return Method::rk4;
  if (s == "midpoint") return Method::midpoint;
  throw Error("unknown integration method '" + std::string(s) + "' (expected midpoint or rk4)");
}

void check_config(const SimConfig& c) {
  if (!(c.step > 0)) throw Error("step must be positive");
  if (!(c.tf > c.t0)) throw Error("tf must exceed t0");
  if (!(c.event_tol > 0 && c.event_tol < c.step)) throw Error("event_tol must lie in (0, step)");
  if (!(c.heaviside_a > 0)) throw Error("heaviside_a must be positive");
  if (c.max_events_per_step < 1) throw Error("max_events_per_step must be at least 1");
}

double smooth_heaviside(double a, double x) { return 0.5 + std::atan(a * x) / std::numbers::pi; }

int OdeModel::param_index(const std::string& name) const {
  for (int i = 0; i < np(); ++i)
    if (param_names[static_cast<std::size_t>(i)] == name) return i;
  throw UnknownParameter(name, param_names);
}

int OdeModel::output_index(const std::string& name) const {
  for (int i = 0; i < ny(); ++i)
    if (output_names[static_cast<std::size_t>(i)] == name) return i;
  return -1;
}

void OdeModel::set_param(const std::string& name, double value) {
  theta[static_cast<std::size_t>(param_index(name))] = value;
}

ParamValues OdeModel::param_values() const {
  ParamValues p;
  for (int i = 0; i < np(); ++i) p[param_names[static_cast<std::size_t>(i)]] = theta[static_cast<std::size_t>(i)];
  return p;
}

namespace {

Var lookup(const std::vector<std::string>& names, const std::vector<Var>& vars, const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return vars[i];
  throw UnknownParameter(name, names);
}

std::function<Var(const std::string&)> binder(const std::vector<std::string>& names, const std::vector<Var>& vars) {
  return [&names, &vars](const std::string& n) { return lookup(names, vars, n); };
}

}  // namespace

Var OdeContext::param(const std::string& name) const { return lookup(names_, theta_, name); }
Var EventContext::param(const std::string& name) const { return lookup(names_, theta_, name); }

OdeModel make_ode(const OdeDefinition& def) {
  OdeModel m;
  m.n = static_cast<int>(def.states.size());
  if (m.n < 1) throw Error("a model needs at least one state");
  if (def.initial.size() != def.states.size()) throw Error("one initial value per state is required");
  for (const auto& [name, v] : def.params) {
    m.param_names.push_back(name);
    m.theta.push_back(v);
  }
  m.state_names = def.states;
  m.num_signals = static_cast<int>(def.delays.size());
  for (std::size_t k = 0; k < def.delays.size(); ++k) {
    if (def.delays[k].state < 0 || def.delays[k].state >= m.n) throw Error("delay refers to a missing state");
    m.delays.push_back({static_cast<int>(k), def.delays[k].delay, false});
  }
  m.has_start = def.start_time.has_value();

  Recorder rec(m.dynamics_inputs());
  OdeContext ctx{rec, {}, rec.input(m.in_t()), {}, {}, {}, m.param_names, {}};
  for (int i = 0; i < m.n; ++i) ctx.x.push_back(rec.input(i));
  for (int j = 0; j < m.np(); ++j) ctx.theta_.push_back(rec.input(m.in_theta() + j));
  for (int k = 0; k < m.num_signals; ++k) ctx.delayed.push_back(rec.input(m.in_delay() + k));
  def.rhs(ctx);
  if (static_cast<int>(ctx.f.size()) != m.n) throw Error("rhs must define one derivative per state");
  for (const auto& v : ctx.f) rec.output(v);
  for (const auto& [name, v] : ctx.outputs) {
    m.output_names.push_back(name);
    rec.output(v);
  }
  for (const auto& d : def.delays) rec.output(ctx.x[static_cast<std::size_t>(d.state)]);
  m.dynamics = rec.build();

  Recorder srec(m.np());
  std::vector<Var> th;
  for (int j = 0; j < m.np(); ++j) th.push_back(srec.input(j));
  auto bind = binder(m.param_names, th);
  for (const auto& e : def.initial) srec.output(e.emit(srec, bind));
  srec.output(def.start_time ? def.start_time->emit(srec, bind) : srec.constant(0.0));
  for (const auto& d : def.delays) srec.output(d.prehistory.emit(srec, bind));
  m.setup = srec.build();
  return m;
}

namespace {

struct EventRecorder {
  Recorder rec;
  EventContext ctx;
  EventRecorder(const OdeModel& m, int nx)
      : rec(nx + 1 + m.np()), ctx{rec, {}, rec.input(nx), m.param_names, {}} {
    for (int i = 0; i < nx; ++i) ctx.x.push_back(rec.input(i));
    for (int j = 0; j < m.np(); ++j) ctx.theta_.push_back(rec.input(nx + 1 + j));
  }
};

}  // namespace

EventSpec make_reset_event(const OdeModel& m, std::string name, const std::function<Var(EventContext&)>& guard,
                           const std::function<std::vector<Var>(EventContext&)>& reset) {
  EventSpec e;
  e.name = std::move(name);
  {
    EventRecorder r(m, m.n);
    r.rec.output(guard(r.ctx));
    e.guard = r.rec.build();
  }
  EventRecorder r(m, m.n);
  auto out = reset(r.ctx);
  if (static_cast<int>(out.size()) != m.n) throw Error("reset must return one value per state");
  for (const auto& v : out) r.rec.output(v);
  e.action = ResetAction{r.rec.build()};
  return e;
}

ImpactSurface make_impact_surface(const OdeModel& m, const ImpactDefinition& def) {
  if (def.q.size() != def.v.size() || def.q.empty()) throw Error("impact surface needs matching q and v index lists");
  for (int i : def.q)
    if (i < 0 || i >= m.n) throw Error("impact surface refers to a missing state");
  for (int i : def.v)
    if (i < 0 || i >= m.n) throw Error("impact surface refers to a missing state");
  const int nq = static_cast<int>(def.q.size());
  ImpactSurface s;
  s.q = def.q;
  s.v = def.v;
  {
    EventRecorder r(m, nq);
    auto a = def.metric(r.ctx);
    if (static_cast<int>(a.size()) != nq * nq) throw DimensionMismatch("metric must have m*m entries");
    for (const auto& v : a) r.rec.output(v);
    s.metric = r.rec.build();
  }
  {
    EventRecorder r(m, nq);
    r.rec.output(def.guard(r.ctx));
    s.guard = r.rec.build();
  }
  {
    EventRecorder r(m, nq);
    auto [e1, e2] = def.potential(r.ctx);
    r.rec.output(e1);
    r.rec.output(e2);
    s.potential = r.rec.build();
  }
  return s;
}

EventSpec make_impact_event(const OdeModel& m, std::string name, ImpactSurface s) {
  EventSpec e;
  e.name = std::move(name);
  Recorder rec(m.n + 1 + m.np());
  std::vector<Var> in;
  for (int i : s.q) in.push_back(rec.input(i));
  in.push_back(rec.input(m.n));
  for (int j = 0; j < m.np(); ++j) in.push_back(rec.input(m.n + 1 + j));
  rec.output(replay(rec, s.guard, in)[0]);
  e.guard = rec.build();
  e.action = std::move(s);
  return e;
}

}  // namespace hybridad
