#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridad/elementary.hpp"
#include "hybridad/jet.hpp"

namespace hybridad {

enum class NodeKind { input, constant, add, sub, mul, div, apply, branch };

/// Branch condition: `value(cond) <cmp> threshold` selects the then-arm.
enum class Cmp { ge, gt, le, lt, eq, ne };

bool compare(Cmp c, double value, double threshold);
const char* cmp_name(Cmp c);
Cmp parse_cmp(std::string_view s);

struct Node {
  NodeKind kind = NodeKind::constant;
  /// add/sub/mul/div: a, b. apply: a. branch: a = condition node,
  /// b = then-arm, c = else-arm.
  int a = -1, b = -1, c = -1;
  int input = -1;        // input index for NodeKind::input
  double value = 0.0;    // constant value, or branch threshold
  ElementaryFn fn{};     // NodeKind::apply
  Cmp cmp = Cmp::ge;     // NodeKind::branch
};

/// Straight-line program with selection nodes. Immutable once built;
/// children always precede their parents.
class Tape {
 public:
  Tape() = default;
  /// Validates topology, input uniqueness and output ids; throws InvalidTape.
  Tape(std::vector<Node> nodes, int num_inputs, std::vector<int> outputs);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int num_inputs() const { return num_inputs_; }
  int num_outputs() const { return static_cast<int>(outputs_.size()); }
  const std::vector<int>& outputs() const { return outputs_; }
  /// Node id holding input j, or -1 when the input is unused.
  int input_node(int j) const { return input_nodes_[static_cast<std::size_t>(j)]; }

  /// One node per line, `id kind children`, followed by an `outputs` line.
  std::string dump() const;

 private:
  std::vector<Node> nodes_;
  int num_inputs_ = 0;
  std::vector<int> outputs_;
  std::vector<int> input_nodes_;
};

/// Literal node-by-node construction (no simplification).
class TapeBuilder {
 public:
  explicit TapeBuilder(int num_inputs);

  int input(int j);
  int constant(double v);
  int add(int a, int b) { return push_binary(NodeKind::add, a, b); }
  int sub(int a, int b) { return push_binary(NodeKind::sub, a, b); }
  int mul(int a, int b) { return push_binary(NodeKind::mul, a, b); }
  int div(int a, int b) { return push_binary(NodeKind::div, a, b); }
  int apply(const ElementaryFn& f, int a);
  int branch(int cond, Cmp cmp, double threshold, int then_id, int else_id);
  void output(int id) { outputs_.push_back(id); }

  int size() const { return static_cast<int>(nodes_.size()); }
  int num_inputs() const { return num_inputs_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Tape build() const;

 private:
  int push_binary(NodeKind k, int a, int b);
  int push(Node n);
  void check_id(int id) const;

  int num_inputs_;
  std::vector<Node> nodes_;
  std::vector<int> outputs_;
  std::vector<int> input_ids_;
};

class Recorder;

/// Handle to a node under construction in a Recorder.
class Var {
 public:
  Var() = default;
  Var(Recorder* rec, int id) : rec_(rec), id_(id) {}
  int id() const { return id_; }
  Recorder* recorder() const { return rec_; }
  bool valid() const { return rec_ != nullptr; }

 private:
  Recorder* rec_ = nullptr;
  int id_ = -1;
};

/// Tape construction with constant folding and trivial identities
/// (x+0, x*1, x*0, ...). Constants are deduplicated.
class Recorder {
 public:
  explicit Recorder(int num_inputs) : b_(num_inputs) {}

  Var input(int j) { return {this, b_.input(j)}; }
  Var constant(double v);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a) { return sub(constant(0.0), a); }
  Var apply(const ElementaryFn& f, Var a);
  Var branch(Var cond, Cmp cmp, double threshold, Var then_v, Var else_v);
  void output(Var v) { b_.output(v.id()); }

  std::optional<double> constant_value(Var v) const;
  bool is_zero(Var v) const;
  int num_inputs() const { return b_.num_inputs(); }
  const TapeBuilder& builder() const { return b_; }
  Tape build() const { return b_.build(); }

 private:
  Var wrap(int id) { return {this, id}; }
  TapeBuilder b_;
  std::map<std::uint64_t, int> constants_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);
Var operator/(double a, Var b);
Var exp(Var a);
Var log(Var a);
Var sin(Var a);
Var cos(Var a);
Var tan(Var a);
Var atan(Var a);
Var sqrt(Var a);
Var pow(Var a, double p);
Var abs(Var a);
/// cond <cmp> threshold ? then : else
Var select(Var cond, Cmp cmp, double threshold, Var then_v, Var else_v);

// ---------------------------------------------------------------------------
// Evaluation

/// Branch decisions pinned by node id (true = then-arm). Used by the
/// boundary audit to evaluate one-sided arms.
using ForcedArms = std::map<int, bool>;

/// Reusable evaluation workspace for one tape. Not thread-safe; create one
/// per thread.
class Evaluator {
 public:
  explicit Evaluator(const Tape& t);

  /// Primal sweep. Only nodes reachable through taken arms are checked
  /// for domain errors; throws EvalDomainError for the first failing one.
  void run(std::span<const double> x, const ForcedArms* forced = nullptr);

  double value(int node) const { return value_[static_cast<std::size_t>(node)]; }
  double output(int k) const;
  void outputs(std::span<double> out) const;
  std::vector<double> outputs() const;
  bool then_taken(int branch_node) const { return then_[static_cast<std::size_t>(branch_node)] != 0; }
  bool active(int node) const { return needed_[static_cast<std::size_t>(node)] != 0; }

  /// Directional derivative of every output along `dx` (after run()).
  void tangent(std::span<const double> dx, std::span<double> dout);
  /// Gradient of output k w.r.t. all inputs (after run()).
  void adjoint(int k, std::span<double> grad);
  /// Full Jacobian, outputs x inputs (after run()), by forward mode.
  Eigen::MatrixXd jacobian();
  /// Hessian of output k (after run()), forward-over-reverse.
  Eigen::MatrixXd hessian(int k);

  const Tape& tape() const { return *t_; }

 private:
  void prepare_derivs();
  void forward_nodes(std::span<const double> dx);

  const Tape* t_;
  std::vector<double> value_;
  std::vector<std::uint8_t> status_;
  std::vector<std::uint8_t> needed_;
  std::vector<std::uint8_t> diff_;
  std::vector<std::uint8_t> then_;
  std::vector<int> diff_list_;
  std::vector<double> dot_;
  std::vector<double> bar_;
  std::vector<double> d1_;
  std::vector<double> d2_;
  bool derivs_ready_ = false;
};

std::vector<double> tape_eval(const Tape& t, std::span<const double> x);
Eigen::MatrixXd forward_gradient(const Tape& t, std::span<const double> x);
std::vector<double> reverse_gradient(const Tape& t, std::span<const double> x, int out);
/// Forward-over-reverse; symmetric by construction.
Eigen::MatrixXd hessian(const Tape& t, std::span<const double> x, int out);
std::vector<Jet> tape_jet_eval(const Tape& t, std::span<const Jet> x);

enum class SweepMode { forward, reverse };
/// Arithmetic operations performed by one directional derivative
/// (forward, including the primal values) or one adjoint sweep (reverse).
long op_count(const Tape& t, SweepMode mode);
/// Number of arithmetic nodes (add, sub, mul, div, apply).
long primal_op_count(const Tape& t);

struct BoundaryFinding {
  int node = -1;
  double condition = 0;
  double threshold = 0;
  /// Jacobians with the branch forced to each arm; empty when that arm
  /// fails to evaluate or differentiate.
  Eigen::MatrixXd then_jacobian;
  Eigen::MatrixXd else_jacobian;
  std::string then_error;
  std::string else_error;
  double mismatch = 0;  // max |then - else|, +inf if an arm failed
};

/// Reports every active branch whose condition sits on its threshold
/// (within rel_tol) and whose one-sided arm derivatives disagree.
std::vector<BoundaryFinding> boundary_audit(const Tape& t, std::span<const double> x,
                                            double rel_tol = 1e-12);

/// Replaces branch `branch_node` by: `|x_j - center| >= half_width ? then-arm
/// : Taylor polynomial of the then-arm at center` of the given degree. The
/// polynomial is computed by jets with removable 0/0 quotients cancelled.
Tape taylor_patch(const Tape& t, int branch_node, int input, double center, int degree = 12,
                  double half_width = 0.1);

// ---------------------------------------------------------------------------
// Source transformation

/// Re-emits `t` into `rec` with the given input vars; returns output vars.
std::vector<Var> replay(Recorder& rec, const Tape& t, std::span<const Var> inputs);

/// Forward-mode source transformation. `seeds[d][j]` is the tangent of
/// input j in direction d (nullopt = structurally zero). Returns values and
/// per-direction output tangents (nullopt = structurally zero).
struct ReplayResult {
  std::vector<Var> values;
  std::vector<std::vector<std::optional<Var>>> tangents;
};
ReplayResult replay_tangent(Recorder& rec, const Tape& t, std::span<const Var> inputs,
                            const std::vector<std::vector<std::optional<Var>>>& seeds);

/// Tape with outputs [outputs of t..., d(outputs)/d(input j)...].
Tape derivative_tape(const Tape& t, int input);

}  // namespace hybridad
