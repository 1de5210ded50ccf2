#include <algorithm>
#include <cmath>
#include <functional>

#include "hybridad/errors.hpp"
#include "hybridad/tape.hpp"

namespace hybridad {

namespace {

using OptVar = std::optional<Var>;
using Override = std::function<std::optional<Var>(int id, const std::vector<Var>& vals)>;

Var emit(Recorder& rec, const Node& nd, const std::vector<Var>& v, std::span<const Var> inputs) {
  switch (nd.kind) {
    case NodeKind::input: return inputs[static_cast<std::size_t>(nd.input)];
    case NodeKind::constant: return rec.constant(nd.value);
    case NodeKind::add: return rec.add(v[nd.a], v[nd.b]);
    case NodeKind::sub: return rec.sub(v[nd.a], v[nd.b]);
    case NodeKind::mul: return rec.mul(v[nd.a], v[nd.b]);
    case NodeKind::div: return rec.div(v[nd.a], v[nd.b]);
    case NodeKind::apply: return rec.apply(nd.fn, v[nd.a]);
    case NodeKind::branch: return rec.branch(v[nd.a], nd.cmp, nd.value, v[nd.b], v[nd.c]);
  }
  throw InvalidTape("unknown node kind");
}

std::vector<Var> replay_nodes(Recorder& rec, const Tape& t, std::span<const Var> inputs,
                              const Override& over) {
  if (inputs.size() != static_cast<std::size_t>(t.num_inputs()))
    throw DimensionMismatch("replay: input count mismatch");
  std::vector<Var> v(static_cast<std::size_t>(t.size()));
  for (int id = 0; id < t.size(); ++id) {
    if (over) {
      if (auto o = over(id, v)) {
        v[id] = *o;
        continue;
      }
    }
    v[id] = emit(rec, t.node(id), v, inputs);
  }
  return v;
}

OptVar nz(Recorder& rec, Var v) {
  if (rec.is_zero(v)) return std::nullopt;
  return v;
}

OptVar t_add(Recorder& rec, OptVar a, OptVar b) {
  if (!a) return b;
  if (!b) return a;
  return nz(rec, rec.add(*a, *b));
}

OptVar t_sub(Recorder& rec, OptVar a, OptVar b) {
  if (!b) return a;
  if (!a) return nz(rec, rec.neg(*b));
  return nz(rec, rec.sub(*a, *b));
}

OptVar t_scale(Recorder& rec, Var factor, OptVar a) {
  if (!a) return std::nullopt;
  return nz(rec, rec.mul(factor, *a));
}

// d f(a) = f'(a) da, expressed with recorder nodes; v = f(a).
OptVar t_apply(Recorder& rec, const ElementaryFn& f, Var a, Var v, OptVar da) {
  using K = ElementaryFn::Kind;
  if (!da) return std::nullopt;
  switch (f.kind) {
    case K::exp: return t_scale(rec, v, da);
    case K::log: return nz(rec, rec.div(*da, a));
    case K::sin: return t_scale(rec, cos(a), da);
    case K::cos: return nz(rec, rec.neg(rec.mul(sin(a), *da)));
    case K::tan: return t_scale(rec, 1.0 + v * v, da);
    case K::atan: return nz(rec, rec.div(*da, 1.0 + a * a));
    case K::sqrt: return nz(rec, rec.div(0.5 * *da, v));
    case K::pow: {
      const double p = f.exponent;
      if (p == 0) return std::nullopt;
      if (p == 1) return da;
      Var base = p - 1 == 1 ? a : rec.apply(ElementaryFn::power(p - 1), a);
      return t_scale(rec, p * base, da);
    }
    case K::abs: return t_scale(rec, rec.apply(ElementaryFn::of(K::sign), a), da);
    case K::sign: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::vector<Var> replay(Recorder& rec, const Tape& t, std::span<const Var> inputs) {
  std::vector<Var> v = replay_nodes(rec, t, inputs, nullptr);
  std::vector<Var> out;
  out.reserve(t.outputs().size());
  for (int o : t.outputs()) out.push_back(v[o]);
  return out;
}

ReplayResult replay_tangent(Recorder& rec, const Tape& t, std::span<const Var> inputs,
                            const std::vector<std::vector<std::optional<Var>>>& seeds) {
  std::vector<Var> v = replay_nodes(rec, t, inputs, nullptr);
  ReplayResult res;
  for (int o : t.outputs()) res.values.push_back(v[o]);
  for (const auto& seed : seeds) {
    if (seed.size() != static_cast<std::size_t>(t.num_inputs()))
      throw DimensionMismatch("replay_tangent: seed size mismatch");
    std::vector<OptVar> d(static_cast<std::size_t>(t.size()));
    for (int id = 0; id < t.size(); ++id) {
      const Node& nd = t.node(id);
      switch (nd.kind) {
        case NodeKind::input: d[id] = seed[static_cast<std::size_t>(nd.input)]; break;
        case NodeKind::constant: break;
        case NodeKind::add: d[id] = t_add(rec, d[nd.a], d[nd.b]); break;
        case NodeKind::sub: d[id] = t_sub(rec, d[nd.a], d[nd.b]); break;
        case NodeKind::mul:
          d[id] = t_add(rec, t_scale(rec, v[nd.b], d[nd.a]), t_scale(rec, v[nd.a], d[nd.b]));
          break;
        case NodeKind::div: {
          OptVar num = t_sub(rec, d[nd.a], t_scale(rec, v[id], d[nd.b]));
          d[id] = num ? nz(rec, rec.div(*num, v[nd.b])) : std::nullopt;
          break;
        }
        case NodeKind::apply: d[id] = t_apply(rec, nd.fn, v[nd.a], v[id], d[nd.a]); break;
        case NodeKind::branch: {
          OptVar dt = d[nd.b], de = d[nd.c];
          if (!dt && !de) break;
          Var zero = rec.constant(0.0);
          d[id] = nz(rec, rec.branch(v[nd.a], nd.cmp, nd.value, dt ? *dt : zero, de ? *de : zero));
          break;
        }
      }
    }
    std::vector<OptVar> outs;
    for (int o : t.outputs()) outs.push_back(d[o]);
    res.tangents.push_back(std::move(outs));
  }
  return res;
}

Tape derivative_tape(const Tape& t, int input) {
  if (input < 0 || input >= t.num_inputs()) throw DimensionMismatch("derivative_tape: bad input");
  Recorder rec(t.num_inputs());
  std::vector<Var> in;
  for (int j = 0; j < t.num_inputs(); ++j) in.push_back(rec.input(j));
  std::vector<std::vector<OptVar>> seeds(1, std::vector<OptVar>(static_cast<std::size_t>(t.num_inputs())));
  seeds[0][static_cast<std::size_t>(input)] = rec.constant(1.0);
  ReplayResult r = replay_tangent(rec, t, in, seeds);
  for (Var v : r.values) rec.output(v);
  for (const OptVar& d : r.tangents[0]) rec.output(d ? *d : rec.constant(0.0));
  return rec.build();
}

// ---------------------------------------------------------------------------
// taylor_patch

namespace {

Jet truncate(const Jet& a, int r) {
  if (a.order() == r) return a;
  std::vector<double> c(a.coeffs().begin(), a.coeffs().begin() + r + 1);
  return Jet(std::move(c));
}

// Division that cancels common leading zero coefficients (removable 0/0).
Jet cancel_div(const Jet& a, const Jet& b) {
  int k = 0;
  while (k <= b.order() && b[k] == 0.0) ++k;
  if (k > b.order()) throw DivisionByZeroConstantTerm();
  if (k == 0) return a / b;
  double scale = 0;
  for (double c : b.coeffs()) scale = std::max(scale, std::fabs(c));
  for (int i = 0; i < k && i <= a.order(); ++i)
    if (std::fabs(a[i]) > 1e-13 * std::max(1.0, scale))
      throw DomainError("pole, not a removable singularity");
  const int r = std::min(a.order(), b.order()) - k;
  if (r < 0) throw DomainError("taylor_patch: order exhausted by cancellation");
  std::vector<double> an(a.coeffs().begin() + k, a.coeffs().begin() + k + r + 1);
  std::vector<double> bn(b.coeffs().begin() + k, b.coeffs().begin() + k + r + 1);
  return Jet(std::move(an)) / Jet(std::move(bn));
}

std::vector<double> arm_taylor(const Tape& t, int arm, int input, double center, int degree) {
  const int guard = std::min(16, Jet::kMaxOrder - degree);
  const int r0 = degree + guard;
  std::vector<Jet> v(static_cast<std::size_t>(arm + 1));
  std::vector<std::uint8_t> used(static_cast<std::size_t>(arm + 1), 0);
  used[arm] = 1;
  for (int id = arm; id >= 0; --id) {
    if (!used[id]) continue;
    const Node& nd = t.node(id);
    for (int c : {nd.a, nd.b, nd.c})
      if (c >= 0) used[c] = 1;
  }
  for (int id = 0; id <= arm; ++id) {
    if (!used[id]) continue;
    const Node& nd = t.node(id);
    auto pair = [&](int a, int b, auto op) {
      const int r = std::min(v[a].order(), v[b].order());
      return op(truncate(v[a], r), truncate(v[b], r));
    };
    switch (nd.kind) {
      case NodeKind::input:
        if (nd.input != input)
          throw Error("taylor_patch: arm depends on input " + std::to_string(nd.input));
        v[id] = Jet::variable(center, r0);
        break;
      case NodeKind::constant: v[id] = Jet::constant(nd.value, r0); break;
      case NodeKind::add: v[id] = pair(nd.a, nd.b, [](const Jet& x, const Jet& y) { return x + y; }); break;
      case NodeKind::sub: v[id] = pair(nd.a, nd.b, [](const Jet& x, const Jet& y) { return x - y; }); break;
      case NodeKind::mul: v[id] = pair(nd.a, nd.b, [](const Jet& x, const Jet& y) { return x * y; }); break;
      case NodeKind::div: v[id] = cancel_div(v[nd.a], v[nd.b]); break;
      case NodeKind::apply: v[id] = jet_apply(nd.fn, v[nd.a]); break;
      case NodeKind::branch:
        v[id] = compare(nd.cmp, v[nd.a][0], nd.value) ? v[nd.b] : v[nd.c];
        break;
    }
  }
  const Jet& res = v[arm];
  if (res.order() < degree) throw DomainError("taylor_patch: not enough orders left for the degree");
  return std::vector<double>(res.coeffs().begin(), res.coeffs().begin() + degree + 1);
}

}  // namespace

Tape taylor_patch(const Tape& t, int branch_node, int input, double center, int degree,
                  double half_width) {
  if (branch_node < 0 || branch_node >= t.size() || t.node(branch_node).kind != NodeKind::branch)
    throw InvalidTape("taylor_patch: node " + std::to_string(branch_node) + " is not a branch");
  if (input < 0 || input >= t.num_inputs()) throw DimensionMismatch("taylor_patch: bad input");
  if (degree < 0 || degree > Jet::kMaxOrder) throw DomainError("taylor_patch: bad degree");
  if (!(half_width > 0)) throw DomainError("taylor_patch: half width must be positive");
  const Node& br = t.node(branch_node);
  const std::vector<double> coeffs = arm_taylor(t, br.b, input, center, degree);

  Recorder rec(t.num_inputs());
  std::vector<Var> in;
  for (int j = 0; j < t.num_inputs(); ++j) in.push_back(rec.input(j));
  Override over = [&](int id, const std::vector<Var>& v) -> std::optional<Var> {
    if (id != branch_node) return std::nullopt;
    Var d = in[static_cast<std::size_t>(input)] - center;
    Var poly = rec.constant(coeffs.back());
    for (int k = degree - 1; k >= 0; --k) poly = poly * d + coeffs[static_cast<std::size_t>(k)];
    Var arm = v[br.b];
    return select(d, Cmp::ge, half_width, arm, select(d, Cmp::le, -half_width, arm, poly));
  };
  std::vector<Var> v = replay_nodes(rec, t, in, over);
  for (int o : t.outputs()) rec.output(v[o]);
  return rec.build();
}

}  // namespace hybridad
