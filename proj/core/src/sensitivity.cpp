#include "hybridad/agdm.hpp"
#include "hybridad/errors.hpp"
#include "hybridad/sim.hpp"

namespace hybridad {

namespace {

using Seeds = std::vector<std::vector<std::optional<Var>>>;

Var or_zero(Recorder& rec, const std::optional<Var>& v) { return v ? *v : rec.constant(0.0); }

std::vector<std::string> derived_names(const std::vector<std::string>& names, const std::vector<std::string>& thetas) {
  std::vector<std::string> out = names;
  for (const auto& th : thetas)
    for (const auto& n : names) out.push_back(derivative_output_name(n, th));
  return out;
}

// Tape on [x, t, theta] rebuilt for the wider state [x', t, theta]; extra
// states pass through when `pass_through` is set (reset maps).
Tape pad_event_tape(const Tape& t, int n, int n_ext, int np, bool pass_through) {
  Recorder rec(n_ext + 1 + np);
  std::vector<Var> in;
  for (int i = 0; i < n; ++i) in.push_back(rec.input(i));
  for (int j = 0; j <= np; ++j) in.push_back(rec.input(n_ext + j));
  for (const auto& v : replay(rec, t, in)) rec.output(v);
  if (pass_through)
    for (int i = n; i < n_ext; ++i) rec.output(rec.input(i));
  return rec.build();
}

}  // namespace

OdeModel sensitivity_extend(const OdeModel& m, const std::vector<std::string>& thetas) {
  if (thetas.empty()) throw Error("sensitivity_extend needs at least one parameter");
  if (m.sensitivity && !m.events.empty())
    throw Error("nested sensitivities of a model with events are not supported");
  std::vector<int> pidx;
  for (const auto& th : thetas) pidx.push_back(m.param_index(th));
  const int P = static_cast<int>(thetas.size());
  const int n = m.n, nz = m.nz, ny = m.ny(), ns = m.num_signals, np = m.np();
  const int nd = static_cast<int>(m.delays.size()), nr = static_cast<int>(m.rates.size());

  OdeModel out;
  out.n = n * (1 + P);
  out.nz = nz * (1 + P);
  out.num_signals = ns * (1 + P);
  out.param_names = m.param_names;
  out.theta = m.theta;
  out.state_names = derived_names(m.state_names, thetas);
  out.discrete_names = derived_names(m.discrete_names, thetas);
  out.output_names = derived_names(m.output_names, thetas);
  out.rates = m.rates;
  out.has_start = m.has_start;
  out.clamps = m.clamps;
  out.warnings = m.warnings;
  out.sensitivity = SensitivityLayout{n, nz, ny, ns, nd, pidx};

  // Channels: originals, then one per (parameter, channel) on the
  // sensitivity signal, then derivative channels for delays that depend on
  // the parameter.
  out.delays = m.delays;
  for (int k = 0; k < P; ++k)
    for (const auto& c : m.delays) out.delays.push_back({ns * (1 + k) + c.signal, c.delay, c.derivative});
  std::vector<std::vector<int>> slope_channel(static_cast<std::size_t>(P), std::vector<int>(static_cast<std::size_t>(nd), -1));
  std::vector<std::vector<ParamExpr>> dh(static_cast<std::size_t>(P));
  for (int k = 0; k < P; ++k)
    for (int c = 0; c < nd; ++c) {
      const auto& ch = m.delays[static_cast<std::size_t>(c)];
      dh[static_cast<std::size_t>(k)].push_back(ch.delay.diff(thetas[static_cast<std::size_t>(k)]));
      if (dh[static_cast<std::size_t>(k)].back().is_zero()) continue;
      if (ch.derivative)
        throw Error("sensitivity of a delayed derivative with respect to its delay is not supported");
      slope_channel[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = static_cast<int>(out.delays.size());
      out.delays.push_back({ch.signal, ch.delay, true});
    }

  // Dynamics.
  {
    Recorder rec(out.dynamics_inputs());
    std::vector<Var> th;
    for (int j = 0; j < np; ++j) th.push_back(rec.input(out.in_theta() + j));
    auto bind = [&](const std::string& name) { return th[static_cast<std::size_t>(m.param_index(name))]; };

    std::vector<Var> in;
    for (int i = 0; i < n; ++i) in.push_back(rec.input(i));
    in.push_back(rec.input(out.in_t()));
    for (const auto& v : th) in.push_back(v);
    for (int c = 0; c < nd; ++c) in.push_back(rec.input(out.in_delay() + c));
    for (int i = 0; i < nz; ++i) in.push_back(rec.input(out.in_z() + i));
    for (int r = 0; r < nr; ++r) in.push_back(rec.input(out.in_hits() + r));

    Seeds seeds(static_cast<std::size_t>(P), std::vector<std::optional<Var>>(in.size()));
    for (int k = 0; k < P; ++k) {
      auto& s = seeds[static_cast<std::size_t>(k)];
      for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = rec.input(n * (1 + k) + i);
      s[static_cast<std::size_t>(m.in_theta() + pidx[static_cast<std::size_t>(k)])] = rec.constant(1.0);
      for (int c = 0; c < nd; ++c) {
        Var dc = rec.input(out.in_delay() + nd * (1 + k) + c);
        int sc = slope_channel[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
        if (sc >= 0) dc = dc - rec.input(out.in_delay() + sc) * dh[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)].emit(rec, bind);
        s[static_cast<std::size_t>(m.in_delay() + c)] = dc;
      }
      for (int i = 0; i < nz; ++i) s[static_cast<std::size_t>(m.in_z() + i)] = rec.input(out.in_z() + nz * (1 + k) + i);
    }
    auto r = replay_tangent(rec, m.dynamics, in, seeds);
    auto section = [&](int first, int count) {
      for (int i = 0; i < count; ++i) rec.output(r.values[static_cast<std::size_t>(first + i)]);
      for (int k = 0; k < P; ++k)
        for (int i = 0; i < count; ++i)
          rec.output(or_zero(rec, r.tangents[static_cast<std::size_t>(k)][static_cast<std::size_t>(first + i)]));
    };
    section(0, n);
    section(n, ny);
    section(n + ny, ns);
    section(n + ny + ns, nz);
    out.dynamics = rec.build();
  }

  // Setup: x_theta(start) = dg/dtheta - f(start) dt_start/dtheta.
  {
    Recorder rec(np);
    std::vector<Var> th;
    for (int j = 0; j < np; ++j) th.push_back(rec.input(j));
    Seeds seeds(static_cast<std::size_t>(P), std::vector<std::optional<Var>>(static_cast<std::size_t>(np)));
    for (int k = 0; k < P; ++k) seeds[static_cast<std::size_t>(k)][static_cast<std::size_t>(pidx[static_cast<std::size_t>(k)])] = rec.constant(1.0);
    auto r = replay_tangent(rec, m.setup, th, seeds);
    auto tan = [&](int k, int i) { return r.tangents[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]; };
    const int i_start = n + nz;

    std::vector<Var> f;
    bool need_f = false;
    for (int k = 0; k < P; ++k) need_f = need_f || tan(k, i_start).has_value();
    if (need_f) {
      std::vector<Var> in;
      for (int i = 0; i < n; ++i) in.push_back(r.values[static_cast<std::size_t>(i)]);
      in.push_back(r.values[static_cast<std::size_t>(i_start)]);
      for (const auto& v : th) in.push_back(v);
      for (const auto& c : m.delays)
        in.push_back(c.derivative ? rec.constant(0.0) : r.values[static_cast<std::size_t>(i_start + 1 + c.signal)]);
      for (int i = 0; i < nz; ++i) in.push_back(r.values[static_cast<std::size_t>(n + i)]);
      for (int q = 0; q < nr; ++q) in.push_back(rec.constant(0.0));
      f = replay(rec, m.dynamics, in);
    }

    for (int i = 0; i < n; ++i) rec.output(r.values[static_cast<std::size_t>(i)]);
    for (int k = 0; k < P; ++k)
      for (int i = 0; i < n; ++i) {
        Var v = or_zero(rec, tan(k, i));
        if (auto ts = tan(k, i_start)) v = v - f[static_cast<std::size_t>(i)] * *ts;
        rec.output(v);
      }
    for (int i = 0; i < nz; ++i) rec.output(r.values[static_cast<std::size_t>(n + i)]);
    for (int k = 0; k < P; ++k)
      for (int i = 0; i < nz; ++i) rec.output(or_zero(rec, tan(k, n + i)));
    rec.output(r.values[static_cast<std::size_t>(i_start)]);
    for (int s = 0; s < ns; ++s) rec.output(r.values[static_cast<std::size_t>(i_start + 1 + s)]);
    for (int k = 0; k < P; ++k)
      for (int s = 0; s < ns; ++s) rec.output(or_zero(rec, tan(k, i_start + 1 + s)));
    out.setup = rec.build();
  }

  for (const auto& e : m.events) {
    EventSpec x = e;
    x.guard = pad_event_tape(e.guard, n, out.n, np, false);
    if (auto* reset = std::get_if<ResetAction>(&x.action)) reset->map = pad_event_tape(reset->map, n, out.n, np, true);
    out.events.push_back(std::move(x));
  }
  return out;
}

OdeModel sensitivity_extend(const OdeModel& m, const std::string& theta) {
  return sensitivity_extend(m, std::vector<std::string>{theta});
}

OdeModel dde_extend(const OdeModel& m, const std::string& theta) {
  if (m.delays.empty()) throw Error("dde_extend needs a model with delays");
  return sensitivity_extend(m, theta);
}

}  // namespace hybridad
