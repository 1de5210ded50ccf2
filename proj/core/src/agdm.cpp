#include "hybridad/agdm.hpp"

#include <algorithm>
#include <set>

#include "hybridad/errors.hpp"

namespace hybridad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ExprList strip(ExprList p) {
  std::size_t i = 0;
  while (i + 1 < p.size() && p[i].is_zero()) ++i;
  p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(i));
  return p;
}

ExprList poly_mul(const ExprList& a, const ExprList& b) {
  ExprList r(a.size() + b.size() - 1, ParamExpr(0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = r[i + j] + a[i] * b[j];
  return r;
}

// Descending coefficients, so align on the constant term.
ExprList poly_sub(const ExprList& a, const ExprList& b) {
  const std::size_t n = std::max(a.size(), b.size());
  ExprList r(n, ParamExpr(0.0));
  for (std::size_t i = 0; i < a.size(); ++i) r[n - a.size() + i] = r[n - a.size() + i] + a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[n - b.size() + i] = r[n - b.size() + i] - b[i];
  return r;
}

ExprList diff_list(const ExprList& l, const std::string& th) {
  ExprList r;
  for (const auto& e : l) r.push_back(e.diff(th));
  return r;
}

ExprMatrix diff_matrix(const ExprMatrix& m, const std::string& th) {
  ExprMatrix r;
  for (const auto& row : m) r.push_back(diff_list(row, th));
  return r;
}

bool all_zero(const ExprList& l) {
  return std::all_of(l.begin(), l.end(), [](const ParamExpr& e) { return e.is_zero(); });
}

bool all_zero(const ExprMatrix& m) {
  return std::all_of(m.begin(), m.end(), [](const ExprList& r) { return all_zero(r); });
}

bool depends(const ExprMatrix& m, const std::string& th) {
  for (const auto& r : m)
    for (const auto& e : r)
      if (e.depends_on(th)) return true;
  return false;
}

template <class SS>
bool ss_depends(const SS& s, const std::string& th) {
  return depends(s.A, th) || depends(s.B, th) || depends(s.C, th) || depends(s.D, th);
}

ExprMatrix block2x2(const ExprMatrix& m, const ExprMatrix& dm) {
  const std::size_t r = m.size(), c = m.empty() ? 0 : m[0].size();
  ExprMatrix out(2 * r, ExprList(2 * c, ParamExpr(0.0)));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      out[i][j] = m[i][j];
      out[r + i][c + j] = m[i][j];
      out[r + i][j] = dm[i][j];
    }
  return out;
}

Diagram prune_impl(const Diagram& d, bool derivative_flow_only, const std::vector<int>& inport_widths);

class Transform {
 public:
  Transform(const Diagram& d, std::string theta, const AgdmOptions& o, int outer_inputs,
            std::vector<int> inport_widths)
      : d_(d), th_(std::move(theta)), o_(o), outer_inputs_(outer_inputs), inport_widths_(std::move(inport_widths)) {}

  Diagram run() {
    out_ = d_;
    widths_ = signal_widths(d_, inport_widths_);
    annotation_ = "d/d" + th_;
    for (const auto& b : d_.blocks) rule(b);
    for (const auto& o : d_.outputs) {
      const std::string name = derivative_output_name(o.name, th_);
      if (!out_.output(name)) out_.outputs.push_back({name, dport(o.from)});
    }
    if (o_.prune) out_ = prune_impl(out_, true, inport_widths_);
    return out_;
  }

 private:
  std::string comp(const std::string& id) const { return derivative_block_name(id, th_); }
  std::string helper(const std::string& id, int n) const { return comp(id) + "[" + std::to_string(n) + "]"; }

  PortRef in(const Block& b, int i) const {
    auto p = d_.driver({b.id, i});
    if (!p) throw ValidationError({"input " + b.id + "." + std::to_string(i + 1) + " is not connected"});
    return *p;
  }

  PortRef dport(const PortRef& p) const {
    const Block* b = d_.find(p.block);
    if (b) {
      if (auto* s = std::get_if<blocks::StateSpaceC>(&b->kind); s && ss_depends(*s, th_)) return {comp(p.block), 1};
      if (auto* s = std::get_if<blocks::StateSpaceD>(&b->kind); s && ss_depends(*s, th_)) return {comp(p.block), 1};
    }
    return {comp(p.block), p.port};
  }

  PortRef din(const Block& b, int i) const { return dport(in(b, i)); }

  int width(const PortRef& p) const {
    auto it = widths_.find(p);
    return it == widths_.end() ? 1 : it->second;
  }

  std::string add(const std::string& id, BlockKind k) {
    if (out_.find(id)) throw Error("derivative block name collision: " + id);
    out_.blocks.push_back(Block{id, std::move(k), annotation_});
    return id;
  }
  void link(const PortRef& from, const std::string& to, int port) { out_.links.push_back({from, {to, port}}); }

  blocks::Constant zeros(int w) const { return blocks::Constant{ExprList(static_cast<std::size_t>(w), ParamExpr(0.0))}; }

  // Builds blocks computing e(u) elementwise, where the parameter "u"
  // stands for signal `u`.
  PortRef emit_expr(const ParamExpr& e, const PortRef& u, int w, const std::string& id, int& counter) {
    using Op = ParamExpr::Op;
    auto next = [&]() { return helper(id, ++counter); };
    auto ops = e.operands();
    switch (e.op()) {
      case Op::constant: {
        const std::string b = add(next(), blocks::Constant{ExprList(static_cast<std::size_t>(w), e)});
        return {b, 0};
      }
      case Op::param: return u;
      case Op::neg: {
        PortRef a = emit_expr(ops[0], u, w, id, counter);
        const std::string b = add(next(), blocks::Gain{-1.0});
        link(a, b, 0);
        return {b, 0};
      }
      case Op::apply: {
        PortRef a = emit_expr(ops[0], u, w, id, counter);
        const std::string b = add(next(), blocks::Fn{e.fn()});
        link(a, b, 0);
        return {b, 0};
      }
      case Op::mul: {
        if (auto c = ops[0].constant_value()) {
          PortRef a = emit_expr(ops[1], u, w, id, counter);
          const std::string b = add(next(), blocks::Gain{*c});
          link(a, b, 0);
          return {b, 0};
        }
        [[fallthrough]];
      }
      default: {
        PortRef a = emit_expr(ops[0], u, w, id, counter);
        PortRef c = emit_expr(ops[1], u, w, id, counter);
        std::string b;
        if (e.op() == Op::add) b = add(next(), blocks::Sum{"++"});
        else if (e.op() == Op::sub) b = add(next(), blocks::Sum{"+-"});
        else if (e.op() == Op::mul) b = add(next(), blocks::Product{"**"});
        else b = add(next(), blocks::Product{"*/"});
        link(a, b, 0);
        link(c, b, 1);
        return {b, 0};
      }
    }
  }

  void rule(const Block& b) {
    using namespace blocks;
    const std::string c = comp(b.id);
    // A previous pass w.r.t. the same parameter already built this
    // derivative; differentiating again reuses it.
    if (const Block* prev = d_.find(c); prev && (prev->annotation == annotation_ || prev->annotation.rfind(annotation_ + " ", 0) == 0))
      return;
    const int w = num_outputs(b) > 0 ? width({b.id, 0}) : 1;
    std::visit(
        overloaded{
            [&](const Gain& g) {
              ParamExpr dk = g.k.diff(th_);
              if (dk.is_zero()) {
                add(c, g);
                link(din(b, 0), c, 0);
                return;
              }
              add(c, Sum{"++"});
              add(helper(b.id, 1), g);
              add(helper(b.id, 2), Gain{dk});
              link(din(b, 0), helper(b.id, 1), 0);
              link(in(b, 0), helper(b.id, 2), 0);
              link({helper(b.id, 1), 0}, c, 0);
              link({helper(b.id, 2), 0}, c, 1);
            },
            [&](const Sum& s) {
              add(c, s);
              for (int i = 0; i < num_inputs(b); ++i) link(din(b, i), c, i);
            },
            [&](const Product& p) {
              const int m = static_cast<int>(p.ops.size());
              std::string signs;
              add(c, Sum{std::string(static_cast<std::size_t>(m), '+')});
              for (int i = 0; i < m; ++i) {
                const std::string h = helper(b.id, i + 1);
                std::string ops = p.ops;
                const bool divide = ops[static_cast<std::size_t>(i)] == '/';
                ops[static_cast<std::size_t>(i)] = '*';
                if (divide) ops += "//";
                add(h, Product{ops});
                for (int j = 0; j < m; ++j) link(j == i ? din(b, i) : in(b, j), h, j);
                if (divide) {
                  link(in(b, i), h, m);
                  link(in(b, i), h, m + 1);
                }
                signs += divide ? '-' : '+';
                link({h, 0}, c, i);
              }
              std::get<Sum>(out_.find(c)->kind).signs = signs;
            },
            [&](const Integrator& in) {
              Integrator di{in.initial.diff(th_), std::nullopt, in.saturation ? b.id : in.gated_by};
              add(c, di);
              link(din(b, 0), c, 0);
            },
            [&](const TransferFnS& t) { tf_rule(b, t, c); },
            [&](const TransferFnZ& t) { tf_rule(b, t, c); },
            [&](const StateSpaceC& s) { ss_rule(b, s, c); },
            [&](const StateSpaceD& s) { ss_rule(b, s, c); },
            [&](const Fn& f) {
              const ParamExpr u = ParamExpr::param("u");
              const ParamExpr deriv = apply(f.fn, u).diff("u");
              int counter = 0;
              add(c, Product{"**"});
              PortRef fp = emit_expr(deriv, in(b, 0), w, b.id, counter);
              link(din(b, 0), c, 0);
              link(fp, c, 1);
            },
            [&](const Switch& s) {
              add(c, s);
              link(din(b, 0), c, 0);
              link(in(b, 1), c, 1);
              link(din(b, 2), c, 2);
            },
            [&](const Saturation& s) {
              const std::string z = add(helper(b.id, 1), zeros(w));
              const std::string hi = add(helper(b.id, 2), Switch{s.hi});
              add(c, Switch{s.lo});
              link({z, 0}, hi, 0);
              link(in(b, 0), hi, 1);
              link(din(b, 0), hi, 2);
              link({hi, 0}, c, 0);
              link(in(b, 0), c, 1);
              link({z, 0}, c, 2);
            },
            [&](const SaturationDynamic&) {
              const std::string over = add(helper(b.id, 1), Sum{"+-"});
              const std::string under = add(helper(b.id, 2), Sum{"+-"});
              const std::string low = add(helper(b.id, 3), Switch{0.0});
              add(c, Switch{0.0});
              link(in(b, 1), over, 0);
              link(in(b, 0), over, 1);
              link(in(b, 2), under, 0);
              link(in(b, 1), under, 1);
              link(din(b, 2), low, 0);
              link({under, 0}, low, 1);
              link(din(b, 1), low, 2);
              link(din(b, 0), c, 0);
              link({over, 0}, c, 1);
              link({low, 0}, c, 2);
            },
            [&](const LookupTable1D& l) {
              add(c, LookupDerivative1D{l.x, l.y, o_.lookup_mode, o_.lookup_central});
              link(in(b, 0), c, 0);
              link(din(b, 0), c, 1);
              if (o_.lookup_mode == LookupDerivative1D::Mode::fd)
                out_.warnings.push_back("M5: derivative of lookup table " + b.id +
                                        " uses finite differences over the breakpoint spacing");
            },
            [&](const LookupDerivative1D& l) {
              // The slope is piecewise constant in u, so only du carries a derivative.
              add(c, l);
              link(in(b, 0), c, 0);
              link(din(b, 1), c, 1);
            },
            [&](const Constant& k) { add(c, Constant{diff_list(k.value, th_)}); },
            [&](const Step& s) {
              ParamExpr di = s.initial.diff(th_), dl = s.level.diff(th_);
              if (di.is_zero() && dl.is_zero()) add(c, zeros(1));
              else add(c, Step{s.time, di, dl});
            },
            [&](const TransportDelay& t) {
              const ParamExpr dh = t.delay.diff(th_);
              if (t.slope) {
                if (!dh.is_zero() || !t.slope->diff(th_).is_zero())
                  throw Error("second derivative through the delay of " + b.id + " is not supported");
                add(c, TransportDelay{t.delay, t.prehistory.diff(th_), t.slope});
                link(din(b, 0), c, 0);
                link(din(b, 1), c, 1);
                return;
              }
              TransportDelay dt{t.delay, t.prehistory.diff(th_), std::nullopt};
              if (!dh.is_zero()) dt.slope = dh;
              add(c, dt);
              link(din(b, 0), c, 0);
              if (dt.slope) {
                link(in(b, 0), c, 1);
                out_.find(c)->annotation = annotation_ + " dde-slope";
                out_.warnings.push_back("derivative of " + b.id + " with respect to its delay " + th_ +
                                        " is carried by the DDE slope channel");
              }
            },
            [&](const Mux& m) {
              add(c, m);
              for (int i = 0; i < m.n; ++i) link(din(b, i), c, i);
            },
            [&](const Demux& m) {
              add(c, m);
              link(din(b, 0), c, 0);
            },
            [&](const UnitDelay& u) {
              add(c, UnitDelay{u.initial.diff(th_), u.sample_time});
              link(din(b, 0), c, 0);
            },
            [&](const Subsystem& s) {
              const int n = num_inputs(b);
              Diagram body = *s.body;
              for (const auto& p : d_.params)
                if (!body.has_param(p.first)) body.params.push_back(p);
              std::vector<int> iw;
              for (int i = 0; i < n; ++i) iw.push_back(width(in(b, i)));
              Diagram inner = Transform(body, th_, o_, n, iw).run();
              // Keep only the derivative outputs; inputs are (u..., du...).
              inner.outputs.erase(inner.outputs.begin(),
                                  inner.outputs.begin() + static_cast<std::ptrdiff_t>(s.body->outputs.size()));
              add(c, Subsystem{std::make_shared<const Diagram>(std::move(inner))});
              for (int i = 0; i < n; ++i) {
                link(in(b, i), c, i);
                link(din(b, i), c, n + i);
              }
            },
            [&](const Inport& p) {
              if (outer_inputs_ < 0) throw ValidationError({"inport " + b.id + " outside a subsystem"});
              add(c, Inport{p.index + outer_inputs_});
            },
        },
        b.kind);
  }

  template <class TF>
  void tf_rule(const Block& b, const TF& t, const std::string& c) {
    auto [dn, dd] = tf_param_derivative(t.num, t.den, th_);
    if (all_zero(dn)) {
      add(c, t);
      link(din(b, 0), c, 0);
      return;
    }
    TF src = t;
    src.num = dn;
    src.den = dd;
    add(c, blocks::Sum{"++"});
    add(helper(b.id, 1), t);
    add(helper(b.id, 2), src);
    link(din(b, 0), helper(b.id, 1), 0);
    link(in(b, 0), helper(b.id, 2), 0);
    link({helper(b.id, 1), 0}, c, 0);
    link({helper(b.id, 2), 0}, c, 1);
  }

  template <class SS>
  void ss_rule(const Block& b, const SS& s, const std::string& c) {
    if (!ss_depends(s, th_)) {
      add(c, s);
      link(din(b, 0), c, 0);
      return;
    }
    StateSpaceMatrices aug = ss_augment({s.A, s.B, s.C, s.D}, th_);
    SS big = s;
    big.A = aug.A;
    big.B = aug.B;
    big.C = aug.C;
    big.D = aug.D;
    const std::string mux = add(helper(b.id, 1), blocks::Mux{2});
    const std::string sys = add(helper(b.id, 2), big);
    add(c, blocks::Demux{2});
    link(in(b, 0), mux, 0);
    link(din(b, 0), mux, 1);
    link({mux, 0}, sys, 0);
    link({sys, 0}, c, 0);
  }

  const Diagram& d_;
  std::string th_;
  AgdmOptions o_;
  int outer_inputs_;
  std::vector<int> inport_widths_;
  Diagram out_;
  std::map<PortRef, int> widths_;
  std::string annotation_;
};

}  // namespace

std::string derivative_block_name(const std::string& id, const std::string& th) {
  const std::string suffix = ")/d(" + th + ")";
  if (id.rfind("d(", 0) == 0 && ends_with(id, suffix) && id.size() > 2 + suffix.size())
    return "d2(" + id.substr(2, id.size() - 2 - suffix.size()) + ")/d(" + th + ")2";
  return "d(" + id + ")/d(" + th + ")";
}

std::string derivative_output_name(const std::string& name, const std::string& th) {
  const std::string suffix = "/d" + th;
  if (name.size() > 1 + suffix.size() && name[0] == 'd' && ends_with(name, suffix)) {
    const std::string x = name.substr(1, name.size() - 1 - suffix.size());
    if (x.find('/') == std::string::npos) return "d2" + x + "/d" + th + "2";
  }
  if (name.find('/') != std::string::npos) return "d(" + name + ")/d" + th;
  return "d" + name + "/d" + th;
}

Diagram agdm_diff(const Diagram& d, const std::string& theta, const AgdmOptions& opts) {
  if (!d.has_param(theta)) throw UnknownParameter(theta, d.param_names());
  require_valid(d);
  return Transform(d, theta, opts, -1, {}).run();
}

std::pair<ExprList, ExprList> tf_param_derivative(const ExprList& num, const ExprList& den, const std::string& th) {
  ExprList dn = diff_list(num, th), dd = diff_list(den, th);
  if (all_zero(dd)) return {strip(dn), den};
  ExprList n = strip(poly_sub(poly_mul(dn, den), poly_mul(num, dd)));
  return {n, poly_mul(den, den)};
}

StateSpaceMatrices ss_augment(const StateSpaceMatrices& m, const std::string& th) {
  auto rows = [](const ExprMatrix& x) { return x.size(); };
  auto cols = [](const ExprMatrix& x) { return x.empty() ? std::size_t{0} : x[0].size(); };
  const std::size_t n = rows(m.A);
  const bool ok = cols(m.A) == n && rows(m.B) == n && cols(m.C) == n && rows(m.C) == rows(m.D) &&
                  cols(m.B) == cols(m.D);
  if (!ok) throw DimensionMismatch("state-space matrices have inconsistent dimensions");
  return {block2x2(m.A, diff_matrix(m.A, th)), block2x2(m.B, diff_matrix(m.B, th)),
          block2x2(m.C, diff_matrix(m.C, th)), block2x2(m.D, diff_matrix(m.D, th))};
}

// ---------------------------------------------------------------------------
// prune_zero

namespace {

// Whether a block's outputs are zero given which inputs are zero; nullopt
// when the block has no zero rule.
std::optional<bool> zero_rule(const Block& b, const std::vector<bool>& zin) {
  using namespace blocks;
  auto all_in = [&]() { return std::all_of(zin.begin(), zin.end(), [](bool z) { return z; }); };
  return std::visit(
      overloaded{
          [&](const Constant& c) -> std::optional<bool> { return all_zero(c.value); },
          [&](const Step& s) -> std::optional<bool> { return s.initial.is_zero() && s.level.is_zero(); },
          [&](const Gain& g) -> std::optional<bool> { return g.k.is_zero() || zin[0]; },
          [&](const Sum&) -> std::optional<bool> { return all_in(); },
          [&](const Product& p) -> std::optional<bool> {
            for (std::size_t i = 0; i < p.ops.size(); ++i)
              if (p.ops[i] == '*' && zin[i]) return true;
            return false;
          },
          [&](const Integrator& in) -> std::optional<bool> { return zin[0] && in.initial.is_zero(); },
          [&](const TransferFnS& t) -> std::optional<bool> { return zin[0] || all_zero(t.num); },
          [&](const TransferFnZ& t) -> std::optional<bool> { return zin[0] || all_zero(t.num); },
          [&](const StateSpaceC& s) -> std::optional<bool> { return all_in() || (all_zero(s.C) && all_zero(s.D)); },
          [&](const StateSpaceD& s) -> std::optional<bool> { return all_in() || (all_zero(s.C) && all_zero(s.D)); },
          [&](const Switch&) -> std::optional<bool> { return zin[0] && zin[2]; },
          [&](const Saturation& s) -> std::optional<bool> { return zin[0] && s.lo <= 0 && s.hi >= 0; },
          [&](const LookupDerivative1D&) -> std::optional<bool> { return zin[1]; },
          [&](const TransportDelay& t) -> std::optional<bool> {
            return zin[0] && t.prehistory.is_zero() && (!t.slope || t.slope->is_zero() || zin[1]);
          },
          [&](const Mux&) -> std::optional<bool> { return all_in(); },
          [&](const Demux&) -> std::optional<bool> { return zin[0]; },
          [&](const UnitDelay& u) -> std::optional<bool> { return zin[0] && u.initial.is_zero(); },
          [&](const auto&) -> std::optional<bool> { return std::nullopt; },
      },
      b.kind);
}

}  // namespace

Diagram prune_zero(const Diagram& d, bool derivative_flow_only) { return prune_impl(d, derivative_flow_only, {}); }

namespace {

Diagram prune_impl(const Diagram& d, bool derivative_flow_only, const std::vector<int>& inport_widths) {
  auto candidate = [&](const Block& b) { return !derivative_flow_only || !b.annotation.empty(); };
  const auto widths = signal_widths(d, inport_widths);

  // Greatest fixpoint: start from "every candidate is zero" and refute.
  std::map<std::string, bool> zero;
  for (const auto& b : d.blocks) {
    std::vector<bool> none(static_cast<std::size_t>(num_inputs(b)), true);
    zero[b.id] = candidate(b) && zero_rule(b, none).has_value();
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& b : d.blocks) {
      if (!zero[b.id]) continue;
      std::vector<bool> zin;
      for (int i = 0; i < num_inputs(b); ++i) {
        auto src = d.driver({b.id, i});
        zin.push_back(src && zero[src->block]);
      }
      if (!*zero_rule(b, zin)) {
        zero[b.id] = false;
        changed = true;
      }
    }
  }

  Diagram out = d;
  out.blocks.clear();
  out.links.clear();
  std::string annotation;
  for (const auto& b : d.blocks) {
    if (zero[b.id]) {
      if (annotation.empty()) annotation = b.annotation;
      continue;
    }
    out.blocks.push_back(b);
  }
  if (annotation.empty()) annotation = "zero";
  std::map<int, std::string> zero_blocks;
  auto zero_source = [&](const PortRef& p) -> PortRef {
    auto it = widths.find(p);
    const int w = it == widths.end() ? 1 : it->second;
    auto z = zero_blocks.find(w);
    if (z != zero_blocks.end()) return {z->second, 0};
    std::string id = w == 1 ? "zero" : "zero" + std::to_string(w);
    while (d.find(id)) id += "_";
    out.blocks.push_back(Block{id, blocks::Constant{ExprList(static_cast<std::size_t>(w), ParamExpr(0.0))}, annotation});
    zero_blocks[w] = id;
    return {id, 0};
  };

  for (auto& b : out.blocks) {
    const int n = num_inputs(b);
    if (auto* s = std::get_if<blocks::Sum>(&b.kind)) {
      std::string signs;
      std::vector<PortRef> kept;
      for (int i = 0; i < n; ++i) {
        auto src = d.driver({b.id, i});
        if (!src || zero[src->block]) continue;
        signs += s->signs[static_cast<std::size_t>(i)];
        kept.push_back(*src);
      }
      if (!kept.empty()) {
        s->signs = signs;
        for (int i = 0; i < static_cast<int>(kept.size()); ++i) out.links.push_back({kept[static_cast<std::size_t>(i)], {b.id, i}});
        continue;
      }
    }
    for (int i = 0; i < n; ++i) {
      auto src = d.driver({b.id, i});
      if (!src) continue;
      out.links.push_back({zero[src->block] ? zero_source(*src) : *src, {b.id, i}});
    }
  }
  for (auto& o : out.outputs)
    if (zero[o.from.block]) o.from = zero_source(o.from);

  // Drop candidate blocks nothing reads any more.
  for (bool changed = true; changed;) {
    changed = false;
    std::set<std::string> used;
    for (const auto& l : out.links) used.insert(l.from.block);
    for (const auto& o : out.outputs) used.insert(o.from.block);
    for (auto it = out.blocks.begin(); it != out.blocks.end();) {
      if (candidate(*it) && !used.count(it->id)) {
        const std::string id = it->id;
        it = out.blocks.erase(it);
        out.links.erase(std::remove_if(out.links.begin(), out.links.end(),
                                       [&](const Link& l) { return l.to.block == id; }),
                        out.links.end());
        changed = true;
      } else {
        ++it;
      }
    }
  }
  return out;
}

}  // namespace

}  // namespace hybridad
