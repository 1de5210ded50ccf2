#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "hybridad/diagram.hpp"
#include "hybridad/errors.hpp"

namespace hybridad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string port_str(const std::string& b, int p) { return b + "." + std::to_string(p + 1); }

void check_exprs(const Diagram& d, const Block& b, std::vector<std::string>& out) {
  std::set<std::string> used;
  auto add = [&](const ParamExpr& e) {
    for (const auto& p : e.params()) used.insert(p);
  };
  auto add_list = [&](const ExprList& l) {
    for (const auto& e : l) add(e);
  };
  auto add_matrix = [&](const ExprMatrix& m) {
    for (const auto& r : m) add_list(r);
  };
  std::visit(overloaded{
                 [&](const blocks::Gain& g) { add(g.k); },
                 [&](const blocks::Integrator& i) { add(i.initial); },
                 [&](const blocks::TransferFnS& t) { add_list(t.num), add_list(t.den); },
                 [&](const blocks::TransferFnZ& t) { add_list(t.num), add_list(t.den); },
                 [&](const blocks::StateSpaceC& s) { add_matrix(s.A), add_matrix(s.B), add_matrix(s.C), add_matrix(s.D); },
                 [&](const blocks::StateSpaceD& s) { add_matrix(s.A), add_matrix(s.B), add_matrix(s.C), add_matrix(s.D); },
                 [&](const blocks::Constant& c) { add_list(c.value); },
                 [&](const blocks::Step& s) { add(s.initial), add(s.level); },
                 [&](const blocks::TransportDelay& t) {
                   add(t.delay), add(t.prehistory);
                   if (t.slope) add(*t.slope);
                 },
                 [&](const blocks::UnitDelay& u) { add(u.initial); },
                 [&](const auto&) {},
             },
             b.kind);
  for (const auto& p : used)
    if (!d.has_param(p)) out.push_back("block " + b.id + " references unknown parameter '" + p + "'");
}

void check_tf(const Block& b, const ExprList& num, const ExprList& den, const ParamValues& pv,
              std::vector<std::string>& out) {
  if (num.empty() || den.empty()) {
    out.push_back("transfer function " + b.id + " has an empty coefficient list");
    return;
  }
  try {
    const int dn = poly_degree(num, pv), dd = poly_degree(den, pv);
    if (dd < 0) {
      out.push_back("transfer function " + b.id + " has a zero denominator");
      return;
    }
    if (den.front().eval(pv) == 0.0)
      out.push_back("transfer function " + b.id + " has a zero leading denominator coefficient");
    if (dn > dd)
      out.push_back("improper transfer function " + b.id + ": numerator degree " + std::to_string(dn) +
                    " exceeds denominator degree " + std::to_string(dd));
  } catch (const Error&) {
    // Unknown parameters are reported separately.
  }
}

void check_ss(const Block& b, const ExprMatrix& A, const ExprMatrix& B, const ExprMatrix& C, const ExprMatrix& D,
              std::vector<std::string>& out) {
  const std::size_t n = A.size();
  auto cols = [](const ExprMatrix& m) { return m.empty() ? std::size_t{0} : m[0].size(); };
  bool ok = cols(A) == n || n == 0;
  ok = ok && B.size() == n && C.size() == D.size() && (n == 0 || cols(C) == n) && (n == 0 || cols(B) == cols(D));
  if (n == 0) ok = ok && !D.empty();
  if (!ok) out.push_back("state-space block " + b.id + " has inconsistent A, B, C, D dimensions");
}

// Cycle through feedthrough edges, as a list of block ids.
std::vector<std::vector<std::string>> algebraic_loops(const Diagram& d) {
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& l : d.links) {
    const Block* to = d.find(l.to.block);
    if (to && has_feedthrough(*to)) succ[l.from.block].push_back(l.to.block);
  }
  std::map<std::string, int> color;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> loops;
  std::set<std::set<std::string>> seen;
  std::function<void(const std::string&)> dfs = [&](const std::string& u) {
    color[u] = 1;
    stack.push_back(u);
    for (const auto& v : succ[u]) {
      if (color[v] == 1) {
        auto it = std::find(stack.begin(), stack.end(), v);
        std::vector<std::string> cyc(it, stack.end());
        if (seen.insert(std::set<std::string>(cyc.begin(), cyc.end())).second) loops.push_back(cyc);
      } else if (color[v] == 0) {
        dfs(v);
      }
    }
    stack.pop_back();
    color[u] = 2;
  };
  for (const auto& b : d.blocks)
    if (color[b.id] == 0) dfs(b.id);
  return loops;
}

void validate_into(const Diagram& d, bool top, const std::string& prefix, std::vector<std::string>& out) {
  const std::size_t before = out.size();
  const ParamValues pv = d.param_values();
  if (d.outputs.empty()) out.push_back(prefix + "diagram has no outputs");
  std::set<std::string> ids;
  for (const auto& b : d.blocks)
    if (!ids.insert(b.id).second) out.push_back(prefix + "duplicate block id " + b.id);

  // Link endpoints and drivers.
  std::map<PortRef, int> drivers;
  for (const auto& l : d.links) {
    const Block* f = d.find(l.from.block);
    const Block* t = d.find(l.to.block);
    if (!f || l.from.port < 0 || l.from.port >= num_outputs(*f))
      out.push_back(prefix + "link source " + port_str(l.from.block, l.from.port) + " does not exist");
    if (!t || l.to.port < 0 || l.to.port >= num_inputs(*t))
      out.push_back(prefix + "link target " + port_str(l.to.block, l.to.port) + " does not exist");
    ++drivers[l.to];
  }
  for (const auto& b : d.blocks)
    for (int i = 0; i < num_inputs(b); ++i) {
      const int n = drivers[{b.id, i}];
      if (n == 0) out.push_back(prefix + "input " + port_str(b.id, i) + " is not connected");
      if (n > 1) out.push_back(prefix + "input " + port_str(b.id, i) + " has " + std::to_string(n) + " drivers");
    }
  for (const auto& o : d.outputs) {
    const Block* f = d.find(o.from.block);
    if (!f || o.from.port < 0 || o.from.port >= num_outputs(*f))
      out.push_back(prefix + "output " + o.name + " reads missing port " + port_str(o.from.block, o.from.port));
  }

  for (const auto& b : d.blocks) {
    check_exprs(d, b, out);
    std::visit(overloaded{
                   [&](const blocks::Sum& s) {
                     if (s.signs.empty() || s.signs.find_first_not_of("+-") != std::string::npos)
                       out.push_back(prefix + "sum " + b.id + " has invalid signs \"" + s.signs + "\"");
                   },
                   [&](const blocks::Product& p) {
                     if (p.ops.empty() || p.ops.find_first_not_of("*/") != std::string::npos)
                       out.push_back(prefix + "product " + b.id + " has invalid ops \"" + p.ops + "\"");
                   },
                   [&](const blocks::Integrator& in) {
                     if (in.saturation && !(in.saturation->first < in.saturation->second))
                       out.push_back(prefix + "integrator " + b.id + " has an empty saturation range");
                     if (!in.gated_by.empty()) {
                       const Block* g = d.find(in.gated_by);
                       const auto* gi = g ? std::get_if<blocks::Integrator>(&g->kind) : nullptr;
                       if (!gi || !gi->saturation)
                         out.push_back(prefix + "integrator " + b.id + " is gated by " + in.gated_by +
                                       ", which is not a saturated integrator");
                     }
                   },
                   [&](const blocks::TransferFnS& t) { check_tf(b, t.num, t.den, pv, out); },
                   [&](const blocks::TransferFnZ& t) {
                     check_tf(b, t.num, t.den, pv, out);
                     if (!(t.sample_time > 0)) out.push_back(prefix + "block " + b.id + " needs a positive sample time");
                   },
                   [&](const blocks::StateSpaceC& s) { check_ss(b, s.A, s.B, s.C, s.D, out); },
                   [&](const blocks::StateSpaceD& s) {
                     check_ss(b, s.A, s.B, s.C, s.D, out);
                     if (!(s.sample_time > 0)) out.push_back(prefix + "block " + b.id + " needs a positive sample time");
                   },
                   [&](const blocks::Saturation& s) {
                     if (!(s.lo <= s.hi)) out.push_back(prefix + "saturation " + b.id + " has lo > hi");
                   },
                   [&](const blocks::LookupTable1D& l) {
                     if (l.x.size() != l.y.size() || l.x.size() < 2)
                       out.push_back(prefix + "lookup table " + b.id + " needs matching x/y lists of length >= 2");
                     for (std::size_t i = 1; i < l.x.size(); ++i)
                       if (!(l.x[i] > l.x[i - 1])) {
                         out.push_back(prefix + "lookup table " + b.id + " breakpoints are not strictly increasing");
                         break;
                       }
                   },
                   [&](const blocks::LookupDerivative1D& l) {
                     if (l.x.size() != l.y.size() || l.x.size() < 2)
                       out.push_back(prefix + "lookup table " + b.id + " needs matching x/y lists of length >= 2");
                     for (std::size_t i = 1; i < l.x.size(); ++i)
                       if (!(l.x[i] > l.x[i - 1])) {
                         out.push_back(prefix + "lookup table " + b.id + " breakpoints are not strictly increasing");
                         break;
                       }
                   },
                   [&](const blocks::Constant& c) {
                     if (c.value.empty()) out.push_back(prefix + "constant " + b.id + " is empty");
                   },
                   [&](const blocks::Mux& m) {
                     if (m.n < 1) out.push_back(prefix + "mux " + b.id + " needs n >= 1");
                   },
                   [&](const blocks::Demux& m) {
                     if (m.n < 1) out.push_back(prefix + "demux " + b.id + " needs n >= 1");
                   },
                   [&](const blocks::UnitDelay& u) {
                     if (!(u.sample_time > 0)) out.push_back(prefix + "block " + b.id + " needs a positive sample time");
                   },
                   [&](const blocks::Subsystem& s) {
                     if (!s.body) {
                       out.push_back(prefix + "subsystem " + b.id + " has no body");
                       return;
                     }
                     // The body sees the enclosing parameters.
                     Diagram body = *s.body;
                     for (const auto& p : d.params)
                       if (!body.has_param(p.first)) body.params.push_back(p);
                     validate_into(body, false, prefix + b.id + "/", out);
                   },
                   [&](const blocks::Inport& p) {
                     if (top) out.push_back(prefix + "inport " + b.id + " outside a subsystem");
                     if (p.index < 0) out.push_back(prefix + "inport " + b.id + " has an invalid index");
                   },
                   [&](const auto&) {},
               },
               b.kind);
  }

  for (const auto& cyc : algebraic_loops(d)) {
    std::string path;
    for (const auto& id : cyc) path += id + " -> ";
    path += cyc.front();
    out.push_back(prefix + "algebraic loop: " + path);
  }

  // Width inference needs a well-formed graph.
  if (top && out.size() == before) {
    try {
      signal_widths(d);
    } catch (const ValidationError& e) {
      for (const auto& v : e.violations()) out.push_back(prefix + v);
    }
  }
}

}  // namespace

ValidationReport validate(const Diagram& d) {
  ValidationReport r;
  validate_into(d, true, "", r.violations);
  return r;
}

void require_valid(const Diagram& d) {
  auto r = validate(d);
  if (!r.ok()) throw ValidationError(r.violations);
}

}  // namespace hybridad
