#include "hybridad/tape.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hybridad/errors.hpp"

namespace hybridad {

bool compare(Cmp c, double v, double thr) {
  switch (c) {
    case Cmp::ge: return v >= thr;
    case Cmp::gt: return v > thr;
    case Cmp::le: return v <= thr;
    case Cmp::lt: return v < thr;
    case Cmp::eq: return v == thr;
    case Cmp::ne: return v != thr;
  }
  return false;
}

const char* cmp_name(Cmp c) {
  switch (c) {
    case Cmp::ge: return "ge";
    case Cmp::gt: return "gt";
    case Cmp::le: return "le";
    case Cmp::lt: return "lt";
    case Cmp::eq: return "eq";
    case Cmp::ne: return "ne";
  }
  return "?";
}

Cmp parse_cmp(std::string_view s) {
  if (s == "ge" || s == ">=") return Cmp::ge;
  if (s == "gt" || s == ">") return Cmp::gt;
  if (s == "le" || s == "<=") return Cmp::le;
  if (s == "lt" || s == "<") return Cmp::lt;
  if (s == "eq" || s == "==") return Cmp::eq;
  if (s == "ne" || s == "!=") return Cmp::ne;
  throw Error("unknown comparison '" + std::string(s) + "'");
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::input: return "input";
    case NodeKind::constant: return "const";
    case NodeKind::add: return "add";
    case NodeKind::sub: return "sub";
    case NodeKind::mul: return "mul";
    case NodeKind::div: return "div";
    case NodeKind::apply: return "apply";
    case NodeKind::branch: return "branch";
  }
  return "?";
}

}  // namespace

Tape::Tape(std::vector<Node> nodes, int num_inputs, std::vector<int> outputs)
    : nodes_(std::move(nodes)), num_inputs_(num_inputs), outputs_(std::move(outputs)) {
  if (num_inputs_ < 0) throw InvalidTape("negative input count");
  input_nodes_.assign(static_cast<std::size_t>(num_inputs_), -1);
  const int n = size();
  auto child_ok = [&](int child, int id) { return child >= 0 && child < id; };
  for (int id = 0; id < n; ++id) {
    const Node& nd = nodes_[static_cast<std::size_t>(id)];
    bool ok = true;
    switch (nd.kind) {
      case NodeKind::input:
        if (nd.input < 0 || nd.input >= num_inputs_)
          throw InvalidTape("node " + std::to_string(id) + ": input index out of range");
        if (input_nodes_[static_cast<std::size_t>(nd.input)] != -1)
          throw InvalidTape("input " + std::to_string(nd.input) + " referenced twice");
        input_nodes_[static_cast<std::size_t>(nd.input)] = id;
        break;
      case NodeKind::constant: break;
      case NodeKind::add:
      case NodeKind::sub:
      case NodeKind::mul:
      case NodeKind::div: ok = child_ok(nd.a, id) && child_ok(nd.b, id); break;
      case NodeKind::apply: ok = child_ok(nd.a, id); break;
      case NodeKind::branch:
        ok = child_ok(nd.a, id) && child_ok(nd.b, id) && child_ok(nd.c, id);
        break;
    }
    if (!ok) throw InvalidTape("node " + std::to_string(id) + " references a later or missing node");
  }
  for (int o : outputs_)
    if (o < 0 || o >= n) throw InvalidTape("output id " + std::to_string(o) + " does not exist");
}

std::string Tape::dump() const {
  std::ostringstream os;
  for (int id = 0; id < size(); ++id) {
    const Node& nd = node(id);
    os << id << ' ' << kind_name(nd.kind);
    switch (nd.kind) {
      case NodeKind::input: os << ' ' << nd.input; break;
      case NodeKind::constant: os << ' ' << fmt(nd.value); break;
      case NodeKind::apply: os << ' ' << nd.fn.name() << ' ' << nd.a; break;
      case NodeKind::branch:
        os << ' ' << nd.a << ' ' << cmp_name(nd.cmp) << ' ' << fmt(nd.value) << ' ' << nd.b << ' '
           << nd.c;
        break;
      default: os << ' ' << nd.a << ' ' << nd.b; break;
    }
    os << '\n';
  }
  os << "outputs";
  for (int o : outputs_) os << ' ' << o;
  os << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

TapeBuilder::TapeBuilder(int num_inputs)
    : num_inputs_(num_inputs), input_ids_(static_cast<std::size_t>(num_inputs), -1) {
  if (num_inputs < 0) throw InvalidTape("negative input count");
}

void TapeBuilder::check_id(int id) const {
  if (id < 0 || id >= size()) throw InvalidTape("reference to missing node " + std::to_string(id));
}

int TapeBuilder::push(Node n) {
  nodes_.push_back(n);
  return size() - 1;
}

int TapeBuilder::input(int j) {
  if (j < 0 || j >= num_inputs_) throw InvalidTape("input index out of range");
  int& slot = input_ids_[static_cast<std::size_t>(j)];
  if (slot < 0) {
    Node n;
    n.kind = NodeKind::input;
    n.input = j;
    slot = push(n);
  }
  return slot;
}

int TapeBuilder::constant(double v) {
  Node n;
  n.kind = NodeKind::constant;
  n.value = v;
  return push(n);
}

int TapeBuilder::push_binary(NodeKind k, int a, int b) {
  check_id(a);
  check_id(b);
  Node n;
  n.kind = k;
  n.a = a;
  n.b = b;
  return push(n);
}

int TapeBuilder::apply(const ElementaryFn& f, int a) {
  check_id(a);
  Node n;
  n.kind = NodeKind::apply;
  n.a = a;
  n.fn = f;
  return push(n);
}

int TapeBuilder::branch(int cond, Cmp cmp, double threshold, int then_id, int else_id) {
  check_id(cond);
  check_id(then_id);
  check_id(else_id);
  Node n;
  n.kind = NodeKind::branch;
  n.a = cond;
  n.b = then_id;
  n.c = else_id;
  n.cmp = cmp;
  n.value = threshold;
  return push(n);
}

Tape TapeBuilder::build() const { return Tape(nodes_, num_inputs_, outputs_); }

// ---------------------------------------------------------------------------

Var Recorder::constant(double v) {
  const std::uint64_t key = std::bit_cast<std::uint64_t>(v);
  auto it = constants_.find(key);
  if (it != constants_.end()) return wrap(it->second);
  int id = b_.constant(v);
  constants_.emplace(key, id);
  return wrap(id);
}

std::optional<double> Recorder::constant_value(Var v) const {
  const Node& n = b_.node(v.id());
  if (n.kind == NodeKind::constant) return n.value;
  return std::nullopt;
}

bool Recorder::is_zero(Var v) const {
  auto c = constant_value(v);
  return c && *c == 0.0;
}

namespace {

bool finite_result(double v) { return std::isfinite(v); }

}  // namespace

Var Recorder::add(Var a, Var b) {
  auto ca = constant_value(a), cb = constant_value(b);
  if (ca && cb && finite_result(*ca + *cb)) return constant(*ca + *cb);
  if (ca && *ca == 0.0) return b;
  if (cb && *cb == 0.0) return a;
  return wrap(b_.add(a.id(), b.id()));
}

Var Recorder::sub(Var a, Var b) {
  auto ca = constant_value(a), cb = constant_value(b);
  if (ca && cb && finite_result(*ca - *cb)) return constant(*ca - *cb);
  if (cb && *cb == 0.0) return a;
  return wrap(b_.sub(a.id(), b.id()));
}

Var Recorder::mul(Var a, Var b) {
  auto ca = constant_value(a), cb = constant_value(b);
  if (ca && cb && finite_result(*ca * *cb)) return constant(*ca * *cb);
  if ((ca && *ca == 0.0) || (cb && *cb == 0.0)) return constant(0.0);
  if (ca && *ca == 1.0) return b;
  if (cb && *cb == 1.0) return a;
  return wrap(b_.mul(a.id(), b.id()));
}

Var Recorder::div(Var a, Var b) {
  auto ca = constant_value(a), cb = constant_value(b);
  if (ca && cb && *cb != 0.0 && finite_result(*ca / *cb)) return constant(*ca / *cb);
  if (cb && *cb == 1.0) return a;
  return wrap(b_.div(a.id(), b.id()));
}

Var Recorder::apply(const ElementaryFn& f, Var a) {
  if (auto ca = constant_value(a)) {
    double out = 0;
    if (eval_fn(f, *ca, out) == FnStatus::ok) return constant(out);
  }
  return wrap(b_.apply(f, a.id()));
}

Var Recorder::branch(Var cond, Cmp cmp, double threshold, Var then_v, Var else_v) {
  if (auto cc = constant_value(cond)) return compare(cmp, *cc, threshold) ? then_v : else_v;
  if (then_v.id() == else_v.id()) return then_v;
  return wrap(b_.branch(cond.id(), cmp, threshold, then_v.id(), else_v.id()));
}

Var operator+(Var a, Var b) { return a.recorder()->add(a, b); }
Var operator-(Var a, Var b) { return a.recorder()->sub(a, b); }
Var operator*(Var a, Var b) { return a.recorder()->mul(a, b); }
Var operator/(Var a, Var b) { return a.recorder()->div(a, b); }
Var operator-(Var a) { return a.recorder()->neg(a); }
Var operator+(Var a, double b) { return a + a.recorder()->constant(b); }
Var operator+(double a, Var b) { return b.recorder()->constant(a) + b; }
Var operator-(Var a, double b) { return a - a.recorder()->constant(b); }
Var operator-(double a, Var b) { return b.recorder()->constant(a) - b; }
Var operator*(Var a, double b) { return a * a.recorder()->constant(b); }
Var operator*(double a, Var b) { return b.recorder()->constant(a) * b; }
Var operator/(Var a, double b) { return a / a.recorder()->constant(b); }
Var operator/(double a, Var b) { return b.recorder()->constant(a) / b; }

namespace {
Var ap(ElementaryFn::Kind k, Var a) { return a.recorder()->apply(ElementaryFn::of(k), a); }
}  // namespace

Var exp(Var a) { return ap(ElementaryFn::Kind::exp, a); }
Var log(Var a) { return ap(ElementaryFn::Kind::log, a); }
Var sin(Var a) { return ap(ElementaryFn::Kind::sin, a); }
Var cos(Var a) { return ap(ElementaryFn::Kind::cos, a); }
Var tan(Var a) { return ap(ElementaryFn::Kind::tan, a); }
Var atan(Var a) { return ap(ElementaryFn::Kind::atan, a); }
Var sqrt(Var a) { return ap(ElementaryFn::Kind::sqrt, a); }
Var abs(Var a) { return ap(ElementaryFn::Kind::abs, a); }
Var pow(Var a, double p) { return a.recorder()->apply(ElementaryFn::power(p), a); }

Var select(Var cond, Cmp cmp, double threshold, Var then_v, Var else_v) {
  return cond.recorder()->branch(cond, cmp, threshold, then_v, else_v);
}

}  // namespace hybridad
