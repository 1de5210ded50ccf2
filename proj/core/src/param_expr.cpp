#include "hybridad/param_expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

#include "hybridad/errors.hpp"

namespace hybridad {

struct ParamExpr::Node {
  Op op = Op::constant;
  double value = 0;
  std::string name;
  ElementaryFn fn{};
  std::shared_ptr<const Node> a, b;
};

namespace {

using K = ElementaryFn::Kind;
using Op = ParamExpr::Op;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

ParamExpr::ParamExpr(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::constant;
  n->value = v;
  n_ = std::move(n);
}

ParamExpr ParamExpr::param(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::param;
  n->name = std::move(name);
  return ParamExpr(std::shared_ptr<const Node>(std::move(n)));
}

ParamExpr ParamExpr::make(Op op, const ParamExpr& a, const ParamExpr& b, ElementaryFn fn) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = a.n_;
  n->b = b.n_;
  n->fn = fn;
  return ParamExpr(std::shared_ptr<const Node>(std::move(n)));
}

ParamExpr::Op ParamExpr::op() const { return n_->op; }

std::optional<double> ParamExpr::constant_value() const {
  if (n_->op == Op::constant) return n_->value;
  return std::nullopt;
}

std::vector<ParamExpr> ParamExpr::operands() const {
  std::vector<ParamExpr> out;
  if (n_->a) out.push_back(ParamExpr(n_->a));
  if (n_->b && n_->op != Op::neg && n_->op != Op::apply) out.push_back(ParamExpr(n_->b));
  return out;
}

const std::string& ParamExpr::name() const { return n_->name; }
const ElementaryFn& ParamExpr::fn() const { return n_->fn; }

bool ParamExpr::is_zero() const { return n_->op == Op::constant && n_->value == 0.0; }
bool ParamExpr::is_one() const { return n_->op == Op::constant && n_->value == 1.0; }

namespace {

bool same_node(const ParamExpr::Node* a, const ParamExpr::Node* b) {
  if (a == b) return true;
  if (!a || !b || a->op != b->op) return false;
  switch (a->op) {
    case Op::constant: return a->value == b->value;
    case Op::param: return a->name == b->name;
    case Op::neg: return same_node(a->a.get(), b->a.get());
    case Op::apply: return a->fn == b->fn && same_node(a->a.get(), b->a.get());
    default: return same_node(a->a.get(), b->a.get()) && same_node(a->b.get(), b->b.get());
  }
}

}  // namespace

bool same(const ParamExpr& a, const ParamExpr& b) { return same_node(a.n_.get(), b.n_.get()); }

ParamExpr operator+(const ParamExpr& a, const ParamExpr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return *ca + *cb;
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::neg) return a - ParamExpr(b.n_->a);
  if (a.op() == Op::neg) return b - ParamExpr(a.n_->a);
  return ParamExpr::make(Op::add, a, b);
}

ParamExpr operator-(const ParamExpr& a, const ParamExpr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return *ca - *cb;
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (same(a, b)) return 0.0;
  if (b.op() == Op::neg) return a + ParamExpr(b.n_->a);
  return ParamExpr::make(Op::sub, a, b);
}

ParamExpr operator*(const ParamExpr& a, const ParamExpr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb) return *ca * *cb;
  if (a.is_zero() || b.is_zero()) return 0.0;
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (ca && *ca == -1.0) return -b;
  if (cb && *cb == -1.0) return -a;
  if (a.op() == Op::neg) return -(ParamExpr(a.n_->a) * b);
  if (b.op() == Op::neg) return -(a * ParamExpr(b.n_->a));
  // Constants go on the left so nested products fold.
  if (cb) return ParamExpr::make(Op::mul, b, a);
  if (ca && b.op() == Op::mul && ParamExpr(b.n_->a).constant_value())
    return (*ca * *ParamExpr(b.n_->a).constant_value()) * ParamExpr(b.n_->b);
  return ParamExpr::make(Op::mul, a, b);
}

ParamExpr operator/(const ParamExpr& a, const ParamExpr& b) {
  auto ca = a.constant_value(), cb = b.constant_value();
  if (ca && cb && *cb != 0.0) return *ca / *cb;
  if (a.is_zero() && !(cb && *cb == 0.0)) return 0.0;
  if (b.is_one()) return a;
  if (cb && *cb == -1.0) return -a;
  if (!cb && same(a, b)) return 1.0;
  if (a.op() == Op::neg) return -(ParamExpr(a.n_->a) / b);
  if (b.op() == Op::neg) return -(a / ParamExpr(b.n_->a));
  return ParamExpr::make(Op::div, a, b);
}

ParamExpr operator-(const ParamExpr& a) {
  if (auto ca = a.constant_value()) return -*ca;
  if (a.op() == Op::neg) return ParamExpr(a.n_->a);
  return ParamExpr::make(Op::neg, a, ParamExpr());
}

ParamExpr apply(const ElementaryFn& f, const ParamExpr& a) {
  if (auto ca = a.constant_value()) {
    double out = 0;
    if (eval_fn(f, *ca, out) == FnStatus::ok) return out;
  }
  if (f.kind == K::pow) {
    if (f.exponent == 1.0) return a;
    if (f.exponent == 0.0) return 1.0;
  }
  return ParamExpr::make(Op::apply, a, ParamExpr(), f);
}

double ParamExpr::eval(const ParamValues& p) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::param: {
      auto it = p.find(n.name);
      if (it == p.end()) {
        std::vector<std::string> names;
        for (const auto& [k, v] : p) names.push_back(k);
        throw UnknownParameter(n.name, names);
      }
      return it->second;
    }
    case Op::add: return ParamExpr(n.a).eval(p) + ParamExpr(n.b).eval(p);
    case Op::sub: return ParamExpr(n.a).eval(p) - ParamExpr(n.b).eval(p);
    case Op::mul: return ParamExpr(n.a).eval(p) * ParamExpr(n.b).eval(p);
    case Op::div: {
      const double d = ParamExpr(n.b).eval(p);
      if (d == 0.0) throw DomainError("division by zero in '" + str() + "'");
      return ParamExpr(n.a).eval(p) / d;
    }
    case Op::neg: return -ParamExpr(n.a).eval(p);
    case Op::apply: {
      double out = 0;
      const double u = ParamExpr(n.a).eval(p);
      if (eval_fn(n.fn, u, out) != FnStatus::ok)
        throw DomainError(n.fn.name() + " outside its domain in '" + str() + "'");
      return out;
    }
  }
  return 0;
}

namespace {

ParamExpr fn_derivative(const ElementaryFn& f, const ParamExpr& u) {
  switch (f.kind) {
    case K::exp: return apply(f, u);
    case K::log: return 1.0 / u;
    case K::sin: return apply(ElementaryFn::of(K::cos), u);
    case K::cos: return -apply(ElementaryFn::of(K::sin), u);
    case K::tan: {
      ParamExpr t = apply(f, u);
      return 1.0 + t * t;
    }
    case K::atan: return 1.0 / (1.0 + u * u);
    case K::sqrt: return 0.5 / apply(f, u);
    case K::pow: return f.exponent * apply(ElementaryFn::power(f.exponent - 1), u);
    case K::abs: return apply(ElementaryFn::of(K::sign), u);
    case K::sign: return 0.0;
  }
  return 0.0;
}

}  // namespace

ParamExpr ParamExpr::diff(const std::string& theta) const {
  const Node& n = *n_;
  if (!depends_on(theta)) return 0.0;
  ParamExpr a(n.a), b(n.b);
  switch (n.op) {
    case Op::constant: return 0.0;
    case Op::param: return n.name == theta ? 1.0 : 0.0;
    case Op::add: return a.diff(theta) + b.diff(theta);
    case Op::sub: return a.diff(theta) - b.diff(theta);
    case Op::mul: return a.diff(theta) * b + a * b.diff(theta);
    case Op::div: {
      ParamExpr da = a.diff(theta), db = b.diff(theta);
      if (db.is_zero()) return da / b;
      return (da * b - a * db) / (b * b);
    }
    case Op::neg: return -a.diff(theta);
    case Op::apply: return fn_derivative(n.fn, a) * a.diff(theta);
  }
  return 0.0;
}

bool ParamExpr::depends_on(const std::string& name) const {
  const Node& n = *n_;
  switch (n.op) {
    case Op::constant: return false;
    case Op::param: return n.name == name;
    case Op::neg:
    case Op::apply: return ParamExpr(n.a).depends_on(name);
    default: return ParamExpr(n.a).depends_on(name) || ParamExpr(n.b).depends_on(name);
  }
}

std::set<std::string> ParamExpr::params() const {
  std::set<std::string> out;
  std::vector<const Node*> stack{n_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->op == Op::param) out.insert(n->name);
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return out;
}

namespace {

int precedence(const ParamExpr::Node& n) {
  switch (n.op) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    case Op::constant: return n.value < 0 ? 3 : 5;
    default: return 5;
  }
}

std::string render(const ParamExpr::Node& n);

std::string wrap(const ParamExpr::Node& child, int min_prec) {
  std::string s = render(child);
  return precedence(child) < min_prec ? "(" + s + ")" : s;
}

std::string render(const ParamExpr::Node& n) {
  switch (n.op) {
    case Op::constant: return fmt(n.value);
    case Op::param: return n.name;
    case Op::add: return wrap(*n.a, 1) + "+" + wrap(*n.b, 1);
    case Op::sub: return wrap(*n.a, 1) + "-" + wrap(*n.b, 2);
    case Op::mul: return wrap(*n.a, 2) + "*" + wrap(*n.b, 2);
    case Op::div: return wrap(*n.a, 2) + "/" + wrap(*n.b, 3);
    case Op::neg: return "-" + wrap(*n.a, 3);
    case Op::apply:
      if (n.fn.kind == K::pow) return "pow(" + render(*n.a) + "," + fmt(n.fn.exponent) + ")";
      return n.fn.name() + "(" + render(*n.a) + ")";
  }
  return "?";
}

}  // namespace

std::string ParamExpr::str() const { return render(*n_); }

Var ParamExpr::emit(Recorder& rec, const std::function<Var(const std::string&)>& param) const {
  const Node& n = *n_;
  ParamExpr a(n.a), b(n.b);
  switch (n.op) {
    case Op::constant: return rec.constant(n.value);
    case Op::param: return param(n.name);
    case Op::add: return rec.add(a.emit(rec, param), b.emit(rec, param));
    case Op::sub: return rec.sub(a.emit(rec, param), b.emit(rec, param));
    case Op::mul: return rec.mul(a.emit(rec, param), b.emit(rec, param));
    case Op::div: return rec.div(a.emit(rec, param), b.emit(rec, param));
    case Op::neg: return rec.neg(a.emit(rec, param));
    case Op::apply: return rec.apply(n.fn, a.emit(rec, param));
  }
  return rec.constant(0.0);
}

ParamExpr ParamExpr::substitute(const std::map<std::string, ParamExpr>& repl) const {
  const Node& n = *n_;
  ParamExpr a(n.a), b(n.b);
  switch (n.op) {
    case Op::constant: return *this;
    case Op::param: {
      auto it = repl.find(n.name);
      return it == repl.end() ? *this : it->second;
    }
    case Op::add: return a.substitute(repl) + b.substitute(repl);
    case Op::sub: return a.substitute(repl) - b.substitute(repl);
    case Op::mul: return a.substitute(repl) * b.substitute(repl);
    case Op::div: return a.substitute(repl) / b.substitute(repl);
    case Op::neg: return -a.substitute(repl);
    case Op::apply: return apply(n.fn, a.substitute(repl));
  }
  return *this;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  ParamExpr run() {
    ParamExpr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(std::string(s_), pos_, what); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ParamExpr expr() {
    ParamExpr e = term();
    for (;;) {
      if (eat('+')) e = e + term();
      else if (eat('-')) e = e - term();
      else return e;
    }
  }

  ParamExpr term() {
    ParamExpr e = unary();
    for (;;) {
      if (eat('*')) e = e * unary();
      else if (eat('/')) e = e / unary();
      else return e;
    }
  }

  ParamExpr unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return power();
  }

  ParamExpr power() {
    ParamExpr base = primary();
    if (eat('^')) {
      const std::size_t at = pos_;
      ParamExpr ex = unary();
      auto c = ex.constant_value();
      if (!c) {
        pos_ = at;
        fail("exponent must be a constant");
      }
      return apply(ElementaryFn::power(*c), base);
    }
    return base;
  }

  double number() {
    skip();
    double v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{}) fail("bad number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  ParamExpr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (eat('(')) {
      ParamExpr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string id(s_.substr(start, pos_ - start));
      if (eat('(')) {
        ParamExpr arg = expr();
        if (id == "pow") {
          if (!eat(',')) fail("pow needs two arguments");
          ParamExpr ex = expr();
          auto ce = ex.constant_value();
          if (!ce) fail("pow exponent must be a constant");
          if (!eat(')')) fail("expected ')'");
          return apply(ElementaryFn::power(*ce), arg);
        }
        if (!eat(')')) fail("expected ')'");
        ElementaryFn f;
        try {
          f = ElementaryFn::parse(id);
        } catch (const DomainError&) {
          pos_ = start;
          fail("unknown function '" + id + "'");
        }
        return apply(f, arg);
      }
      return ParamExpr::param(id);
    }
    fail("unexpected character");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

ParamExpr ParamExpr::parse(std::string_view text) { return Parser(text).run(); }

}  // namespace hybridad
