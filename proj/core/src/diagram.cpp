#include "hybridad/diagram.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "hybridad/errors.hpp"

namespace hybridad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool structurally_zero(const ExprMatrix& m) {
  for (const auto& row : m)
    for (const auto& e : row)
      if (!e.is_zero()) return false;
  return true;
}

std::size_t leading_zeros(const ExprList& p) {
  std::size_t i = 0;
  while (i + 1 < p.size() && p[i].is_zero()) ++i;
  return i;
}

}  // namespace

std::string kind_name(const BlockKind& k) {
  return std::visit(overloaded{
                        [](const blocks::Gain&) { return "Gain"; },
                        [](const blocks::Sum&) { return "Sum"; },
                        [](const blocks::Product&) { return "Product"; },
                        [](const blocks::Integrator&) { return "Integrator"; },
                        [](const blocks::TransferFnS&) { return "TransferFnS"; },
                        [](const blocks::TransferFnZ&) { return "TransferFnZ"; },
                        [](const blocks::StateSpaceC&) { return "StateSpaceC"; },
                        [](const blocks::StateSpaceD&) { return "StateSpaceD"; },
                        [](const blocks::Fn&) { return "Fn"; },
                        [](const blocks::Switch&) { return "Switch"; },
                        [](const blocks::Saturation&) { return "Saturation"; },
                        [](const blocks::SaturationDynamic&) { return "SaturationDynamic"; },
                        [](const blocks::LookupTable1D&) { return "LookupTable1D"; },
                        [](const blocks::LookupDerivative1D&) { return "LookupDerivative1D"; },
                        [](const blocks::Constant&) { return "Constant"; },
                        [](const blocks::Step&) { return "Step"; },
                        [](const blocks::TransportDelay&) { return "TransportDelay"; },
                        [](const blocks::Mux&) { return "Mux"; },
                        [](const blocks::Demux&) { return "Demux"; },
                        [](const blocks::UnitDelay&) { return "UnitDelay"; },
                        [](const blocks::Subsystem&) { return "Subsystem"; },
                        [](const blocks::Inport&) { return "Inport"; },
                    },
                    k);
}

const Block* Diagram::find(const std::string& id) const {
  for (const auto& b : blocks)
    if (b.id == id) return &b;
  return nullptr;
}

Block* Diagram::find(const std::string& id) {
  for (auto& b : blocks)
    if (b.id == id) return &b;
  return nullptr;
}

bool Diagram::has_param(const std::string& n) const {
  return std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.first == n; });
}

ParamValues Diagram::param_values() const {
  ParamValues v;
  for (const auto& [k, x] : params) v[k] = x;
  return v;
}

std::vector<std::string> Diagram::param_names() const {
  std::vector<std::string> out;
  for (const auto& p : params) out.push_back(p.first);
  return out;
}

std::optional<PortRef> Diagram::driver(const PortRef& to) const {
  for (const auto& l : links)
    if (l.to == to) return l.from;
  return std::nullopt;
}

const DiagramOutput* Diagram::output(const std::string& n) const {
  for (const auto& o : outputs)
    if (o.name == n) return &o;
  return nullptr;
}

int Diagram::num_inports() const {
  int n = 0;
  for (const auto& b : blocks)
    if (auto* in = std::get_if<blocks::Inport>(&b.kind)) n = std::max(n, in->index + 1);
  return n;
}

int num_inputs(const Block& b) {
  return std::visit(overloaded{
                        [](const blocks::Sum& s) { return static_cast<int>(s.signs.size()); },
                        [](const blocks::Product& p) { return static_cast<int>(p.ops.size()); },
                        [](const blocks::Switch&) { return 3; },
                        [](const blocks::SaturationDynamic&) { return 3; },
                        [](const blocks::LookupDerivative1D&) { return 2; },
                        [](const blocks::Constant&) { return 0; },
                        [](const blocks::Step&) { return 0; },
                        [](const blocks::Inport&) { return 0; },
                        [](const blocks::TransportDelay& t) { return t.slope ? 2 : 1; },
                        [](const blocks::Mux& m) { return m.n; },
                        [](const blocks::Subsystem& s) { return s.body ? s.body->num_inports() : 0; },
                        [](const auto&) { return 1; },
                    },
                    b.kind);
}

int num_outputs(const Block& b) {
  return std::visit(overloaded{
                        [](const blocks::Demux& d) { return d.n; },
                        [](const blocks::Subsystem& s) {
                          return s.body ? static_cast<int>(s.body->outputs.size()) : 0;
                        },
                        [](const auto&) { return 1; },
                    },
                    b.kind);
}

namespace {

bool tf_feedthrough(const ExprList& num, const ExprList& den) {
  const std::size_t nn = num.size() - std::min(num.size(), leading_zeros(num));
  const std::size_t nd = den.size() - std::min(den.size(), leading_zeros(den));
  return nn >= nd;
}

bool subsystem_feedthrough(const Diagram& body) {
  // Any Inport reaching an output through feedthrough blocks only.
  std::set<std::string> reached;
  std::vector<std::string> stack;
  for (const auto& b : body.blocks)
    if (std::holds_alternative<blocks::Inport>(b.kind)) {
      reached.insert(b.id);
      stack.push_back(b.id);
    }
  while (!stack.empty()) {
    const std::string id = stack.back();
    stack.pop_back();
    for (const auto& l : body.links) {
      if (l.from.block != id) continue;
      const Block* c = body.find(l.to.block);
      if (c && has_feedthrough(*c) && reached.insert(c->id).second) stack.push_back(c->id);
    }
  }
  return std::any_of(body.outputs.begin(), body.outputs.end(),
                     [&](const DiagramOutput& o) { return reached.count(o.from.block) > 0; });
}

}  // namespace

bool has_feedthrough(const Block& b) {
  return std::visit(overloaded{
                        [](const blocks::Integrator&) { return false; },
                        [](const blocks::TransportDelay&) { return false; },
                        [](const blocks::UnitDelay&) { return false; },
                        [](const blocks::Constant&) { return false; },
                        [](const blocks::Step&) { return false; },
                        [](const blocks::Inport&) { return false; },
                        [](const blocks::TransferFnS& t) { return tf_feedthrough(t.num, t.den); },
                        [](const blocks::TransferFnZ& t) { return tf_feedthrough(t.num, t.den); },
                        [](const blocks::StateSpaceC& s) { return !structurally_zero(s.D); },
                        [](const blocks::StateSpaceD& s) { return !structurally_zero(s.D); },
                        [](const blocks::Subsystem& s) { return s.body && subsystem_feedthrough(*s.body); },
                        [](const auto&) { return true; },
                    },
                    b.kind);
}

int poly_degree(const ExprList& p, const ParamValues& values) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].eval(values) != 0.0) return static_cast<int>(p.size() - 1 - i);
  return -1;
}

Diagram load_diagram(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_diagram(ss.str());
}

// ---------------------------------------------------------------------------
// Signal widths

namespace {

int matrix_rows(const ExprMatrix& m) { return static_cast<int>(m.size()); }
int matrix_cols(const ExprMatrix& m) { return m.empty() ? 0 : static_cast<int>(m[0].size()); }

}  // namespace

std::map<PortRef, int> signal_widths(const Diagram& d, const std::vector<int>& inport_widths) {
  std::map<PortRef, int> w;
  std::vector<std::string> errors;
  auto in_width = [&](const Block& b, int port) -> std::optional<int> {
    auto src = d.driver({b.id, port});
    if (!src) return std::nullopt;
    auto it = w.find(*src);
    if (it == w.end()) return std::nullopt;
    return it->second;
  };
  auto set = [&](const Block& b, int port, int width) {
    auto [it, inserted] = w.emplace(PortRef{b.id, port}, width);
    return inserted;
  };
  bool changed = true;
  auto propagate = [&]() {
  changed = true;
  while (changed) {
    changed = false;
    for (const auto& b : d.blocks) {
      const int nin = num_inputs(b);
      std::optional<int> any;
      for (int i = 0; i < nin && !any; ++i) any = in_width(b, i);
      std::visit(overloaded{
                     [&](const blocks::Constant& c) { changed |= set(b, 0, static_cast<int>(c.value.size())); },
                     [&](const blocks::Step&) { changed |= set(b, 0, 1); },
                     [&](const blocks::Inport& p) {
                       const auto idx = static_cast<std::size_t>(p.index);
                       changed |= set(b, 0, idx < inport_widths.size() ? inport_widths[idx] : 1);
                     },
                     [&](const blocks::StateSpaceC& s) { changed |= set(b, 0, std::max(matrix_rows(s.C), matrix_rows(s.D))); },
                     [&](const blocks::StateSpaceD& s) { changed |= set(b, 0, std::max(matrix_rows(s.C), matrix_rows(s.D))); },
                     [&](const blocks::Switch&) {
                       auto a = in_width(b, 0);
                       if (!a) a = in_width(b, 2);
                       if (a) changed |= set(b, 0, *a);
                     },
                     [&](const blocks::SaturationDynamic&) {
                       if (auto a = in_width(b, 1)) changed |= set(b, 0, *a);
                     },
                     [&](const blocks::LookupDerivative1D&) {
                       if (auto a = in_width(b, 0)) changed |= set(b, 0, *a);
                     },
                     [&](const blocks::Mux& m) {
                       int total = 0;
                       for (int i = 0; i < m.n; ++i) {
                         auto a = in_width(b, i);
                         if (!a) return;
                         total += *a;
                       }
                       changed |= set(b, 0, total);
                     },
                     [&](const blocks::Demux& m) {
                       if (auto a = in_width(b, 0); a && m.n > 0)
                         for (int k = 0; k < m.n; ++k) changed |= set(b, k, *a / m.n);
                     },
                     [&](const blocks::Subsystem& s) {
                       if (!s.body) return;
                       std::vector<int> iw;
                       for (int i = 0; i < nin; ++i) {
                         auto a = in_width(b, i);
                         if (!a) return;
                         iw.push_back(*a);
                       }
                       auto inner = signal_widths(*s.body, iw);
                       for (std::size_t k = 0; k < s.body->outputs.size(); ++k) {
                         auto it = inner.find(s.body->outputs[k].from);
                         if (it != inner.end()) changed |= set(b, static_cast<int>(k), it->second);
                       }
                     },
                     [&](const auto&) {
                       if (any) changed |= set(b, 0, *any);
                     },
                 },
                 b.kind);
    }
  }
  };
  propagate();
  // Loops made only of dynamic blocks have no source to take a width
  // from; their scalar initial values make them scalar.
  bool seeded = false;
  for (const auto& b : d.blocks) {
    const bool dynamic = std::holds_alternative<blocks::Integrator>(b.kind) ||
                         std::holds_alternative<blocks::UnitDelay>(b.kind) ||
                         std::holds_alternative<blocks::TransportDelay>(b.kind) ||
                         std::holds_alternative<blocks::TransferFnS>(b.kind) ||
                         std::holds_alternative<blocks::TransferFnZ>(b.kind);
    if (dynamic && !w.count({b.id, 0})) seeded |= set(b, 0, 1);
  }
  if (seeded) propagate();
  // Consistency.
  for (const auto& b : d.blocks) {
    for (int p = 0; p < num_outputs(b); ++p)
      if (!w.count({b.id, p})) errors.push_back("cannot infer the width of " + b.id + "." + std::to_string(p + 1));
    auto expect_equal = [&](int i, int want, const char* what) {
      auto a = in_width(b, i);
      if (a && *a != want)
        errors.push_back("width mismatch at " + b.id + "." + std::to_string(i + 1) + ": got " +
                         std::to_string(*a) + ", expected " + std::to_string(want) + " (" + what + ")");
    };
    auto out_w = [&](int p) {
      auto it = w.find({b.id, p});
      return it == w.end() ? -1 : it->second;
    };
    std::visit(overloaded{
                   [&](const blocks::StateSpaceC& s) { expect_equal(0, std::max(matrix_cols(s.B), matrix_cols(s.D)), "state-space input"); },
                   [&](const blocks::StateSpaceD& s) { expect_equal(0, std::max(matrix_cols(s.B), matrix_cols(s.D)), "state-space input"); },
                   [&](const blocks::Switch&) {
                     expect_equal(0, out_w(0), "switch data");
                     expect_equal(2, out_w(0), "switch data");
                     auto c = in_width(b, 1);
                     if (c && *c != 1 && *c != out_w(0)) expect_equal(1, out_w(0), "switch control");
                   },
                   [&](const blocks::Mux&) {},
                   [&](const blocks::Demux& m) {
                     auto a = in_width(b, 0);
                     if (a && m.n > 0 && *a % m.n != 0)
                       errors.push_back("demux " + b.id + " cannot split width " + std::to_string(*a) + " into " +
                                        std::to_string(m.n));
                   },
                   [&](const blocks::Subsystem&) {},
                   [&](const blocks::Constant&) {},
                   [&](const blocks::Gain& g) {
                     (void)g;
                     expect_equal(0, out_w(0), "elementwise");
                   },
                   [&](const auto&) {
                     for (int i = 0; i < num_inputs(b); ++i) expect_equal(i, out_w(0), "elementwise");
                   },
               },
               b.kind);
  }
  if (!errors.empty()) throw ValidationError(errors);
  return w;
}

}  // namespace hybridad
