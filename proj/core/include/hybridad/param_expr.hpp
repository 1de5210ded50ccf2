#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hybridad/elementary.hpp"
#include "hybridad/tape.hpp"

namespace hybridad {

using ParamValues = std::map<std::string, double>;

/// Scalar expression over named parameters. Immutable and cheap to copy
/// (shared tree). Construction folds constants and trivial identities, so
/// symbolic derivatives stay small.
class ParamExpr {
 public:
  enum class Op { constant, param, add, sub, mul, div, neg, apply };

  ParamExpr() : ParamExpr(0.0) {}
  ParamExpr(double v);  // NOLINT(google-explicit-constructor)
  static ParamExpr param(std::string name);
  /// Infix syntax: numbers, identifiers, + - * / ^ (constant exponent),
  /// parentheses and exp log sin cos tan atan sqrt abs pow(x, c).
  /// Throws ParseError.
  static ParamExpr parse(std::string_view text);

  Op op() const;
  /// Throws UnknownParameter for unbound names, DomainError outside the
  /// domain of an elementary function.
  double eval(const ParamValues& p) const;
  ParamExpr diff(const std::string& theta) const;

  bool depends_on(const std::string& name) const;
  std::set<std::string> params() const;
  std::optional<double> constant_value() const;
  bool is_zero() const;
  bool is_one() const;

  /// Shortest round-trip infix form; parse(str()) evaluates identically.
  std::string str() const;

  /// Re-emits the expression into a tape; `param` maps names to vars.
  Var emit(Recorder& rec, const std::function<Var(const std::string&)>& param) const;

  /// Replaces parameters by expressions (used when inlining subsystems).
  ParamExpr substitute(const std::map<std::string, ParamExpr>& repl) const;

  friend ParamExpr operator+(const ParamExpr& a, const ParamExpr& b);
  friend ParamExpr operator-(const ParamExpr& a, const ParamExpr& b);
  friend ParamExpr operator*(const ParamExpr& a, const ParamExpr& b);
  friend ParamExpr operator/(const ParamExpr& a, const ParamExpr& b);
  friend ParamExpr operator-(const ParamExpr& a);
  friend ParamExpr apply(const ElementaryFn& f, const ParamExpr& a);

  /// Structural equality (same tree shape and leaves).
  friend bool same(const ParamExpr& a, const ParamExpr& b);

  /// Operands: two for binary ops, one for neg/apply, none for leaves.
  std::vector<ParamExpr> operands() const;
  /// Leaf parameter name (op() == param).
  const std::string& name() const;
  /// Applied function (op() == apply).
  const ElementaryFn& fn() const;

  struct Node;

 private:
  explicit ParamExpr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  static ParamExpr make(Op op, const ParamExpr& a, const ParamExpr& b, ElementaryFn fn = {});
  std::shared_ptr<const Node> n_;
};

}  // namespace hybridad
