#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hybridad/elementary.hpp"
#include "hybridad/param_expr.hpp"

namespace hybridad {

class Diagram;

using ExprList = std::vector<ParamExpr>;
using ExprMatrix = std::vector<std::vector<ParamExpr>>;

namespace blocks {

struct Gain {
  ParamExpr k;
};
/// One input per character of `signs` ('+' or '-').
struct Sum {
  std::string signs = "++";
};
/// One input per character of `ops` ('*' or '/').
struct Product {
  std::string ops = "**";
};
struct Integrator {
  ParamExpr initial;
  std::optional<std::pair<double, double>> saturation;
  /// Derivative-flow integrators: frozen (input ignored) whenever the named
  /// original integrator sits on one of its saturation bounds.
  std::string gated_by;
};
/// Coefficients in descending powers of s.
struct TransferFnS {
  ExprList num, den;
};
/// Coefficients in descending powers of z.
struct TransferFnZ {
  ExprList num, den;
  double sample_time = 1;
};
struct StateSpaceC {
  ExprMatrix A, B, C, D;
};
struct StateSpaceD {
  ExprMatrix A, B, C, D;
  double sample_time = 1;
};
struct Fn {
  ElementaryFn fn;
};
/// Inputs (then, control, else): output = control >= threshold ? then : else.
struct Switch {
  double threshold = 0;
};
struct Saturation {
  double lo = -1, hi = 1;
};
/// Inputs (upper bound, signal, lower bound).
struct SaturationDynamic {};
/// Piecewise-linear interpolation, clamped outside the breakpoints.
struct LookupTable1D {
  std::vector<double> x, y;
};
/// Derivative flow of a lookup table. Inputs (u, du): output is
/// slope(u) * du. `fd` mode uses a finite difference with increment equal
/// to the local breakpoint spacing (forward, or central when `central`).
struct LookupDerivative1D {
  enum class Mode { slope, fd };
  std::vector<double> x, y;
  Mode mode = Mode::slope;
  bool central = false;
};
struct Constant {
  ExprList value;
};
/// `initial` before `time`, `level` from `time` on.
struct Step {
  double time = 0;
  ParamExpr initial;
  ParamExpr level = 1.0;
};
/// Output u(t - h); `prehistory` stands in for u before the start time.
/// Derivative copies carry a second input (the original u) and `slope`:
/// output = in1(t - h) - slope * d/dt in2(t - h).
struct TransportDelay {
  ParamExpr delay;
  ParamExpr prehistory;
  std::optional<ParamExpr> slope;
};
/// Concatenates its inputs.
struct Mux {
  int n = 2;
};
/// Splits its input evenly into `n` outputs.
struct Demux {
  int n = 2;
};
struct UnitDelay {
  ParamExpr initial;
  double sample_time = 1;
};
/// Nested diagram; its Inport blocks are the inputs and its outputs list
/// the output ports.
struct Subsystem {
  std::shared_ptr<const Diagram> body;
};
/// Input `index` (0-based) of the enclosing subsystem.
struct Inport {
  int index = 0;
};

}  // namespace blocks

using BlockKind =
    std::variant<blocks::Gain, blocks::Sum, blocks::Product, blocks::Integrator, blocks::TransferFnS,
                 blocks::TransferFnZ, blocks::StateSpaceC, blocks::StateSpaceD, blocks::Fn,
                 blocks::Switch, blocks::Saturation, blocks::SaturationDynamic, blocks::LookupTable1D,
                 blocks::LookupDerivative1D, blocks::Constant, blocks::Step, blocks::TransportDelay,
                 blocks::Mux, blocks::Demux, blocks::UnitDelay, blocks::Subsystem, blocks::Inport>;

/// Kind name as used in the JSON schema ("Gain", "TransferFnS", ...).
std::string kind_name(const BlockKind& k);

struct Block {
  std::string id;
  BlockKind kind;
  /// Set on blocks added by differentiation, e.g. "d/dtau".
  std::string annotation;
};

/// Ports are 0-based here; the JSON form uses 1-based "block.port".
struct PortRef {
  std::string block;
  int port = 0;
  friend bool operator==(const PortRef&, const PortRef&) = default;
  friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct Link {
  PortRef from, to;
};

struct DiagramOutput {
  std::string name;
  PortRef from;
};

class Diagram {
 public:
  std::string name;
  /// Parameter defaults, in declaration order.
  std::vector<std::pair<std::string, double>> params;
  std::vector<Block> blocks;
  std::vector<Link> links;
  std::vector<DiagramOutput> outputs;
  std::vector<std::string> warnings;

  const Block* find(const std::string& id) const;
  Block* find(const std::string& id);
  bool has_param(const std::string& name) const;
  ParamValues param_values() const;
  std::vector<std::string> param_names() const;
  /// Source of the link that drives `to`, if any.
  std::optional<PortRef> driver(const PortRef& to) const;
  const DiagramOutput* output(const std::string& name) const;
  int num_inports() const;
};

int num_inputs(const Block& b);
int num_outputs(const Block& b);

/// Does output `port` depend instantaneously on the inputs (direct
/// feedthrough)? Integrators, delays and strictly proper systems do not.
bool has_feedthrough(const Block& b);

/// Numerator degree, denominator degree after dropping leading zeros.
int poly_degree(const ExprList& p, const ParamValues& values);

// ---------------------------------------------------------------------------
// JSON

/// Parses and validates a schema-1 document. Throws SchemaError with a
/// field path, ValidationError with the violation list.
Diagram parse_diagram(const std::string& document);
/// Parses without running validate.
Diagram parse_diagram_unchecked(const std::string& document);
Diagram load_diagram(const std::string& path);
std::string to_json(const Diagram& d, int indent = 2);

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Structural checks: link endpoints, single drivers, arities, signal
/// widths, parameter names, proper transfer functions, increasing lookup
/// breakpoints and algebraic loops (reported with the cycle path).
ValidationReport validate(const Diagram& d);
/// Throws ValidationError unless validate(d) is ok.
void require_valid(const Diagram& d);

/// Signal width of every block output port; throws ValidationError on
/// inconsistent widths. Inports default to width 1.
std::map<PortRef, int> signal_widths(const Diagram& d, const std::vector<int>& inport_widths = {});

}  // namespace hybridad
