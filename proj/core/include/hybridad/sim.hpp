#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hybridad/diagram.hpp"
#include "hybridad/jet.hpp"
#include "hybridad/param_expr.hpp"
#include "hybridad/tape.hpp"

namespace hybridad {

enum class Method { midpoint, rk4 };
Method parse_method(std::string_view s);

struct SimConfig {
  Method method = Method::rk4;
  double step = 1e-3;
  double t0 = 0;
  double tf = 1;
  double event_tol = 1e-10;
  double heaviside_a = 1e3;
  /// Events allowed inside one step before EventStorm.
  int max_events_per_step = 8;
  /// Seconds after an event during which the same guard cannot fire;
  /// negative means two steps.
  double deadtime = -1;
};

/// Throws Error unless step > 0, event_tol < step, heaviside_a > 0, tf > t0.
void check_config(const SimConfig& c);

// ---------------------------------------------------------------------------
// Model

/// Switching surface with a potential jump. Tapes take [q, t, theta].
struct ImpactSurface {
  std::vector<int> q;  // position state indices
  std::vector<int> v;  // matching velocity state indices
  Tape metric;         // -> m*m entries, row-major; kinetic energy v'Av
  Tape guard;          // -> f
  Tape potential;      // -> [E on the f < 0 side, E on the f > 0 side]
};

/// New state from a tape on [x, t, theta] -> x+.
struct ResetAction {
  Tape map;
};

struct EventSpec {
  std::string name;
  Tape guard;  // [x, t, theta] -> scalar
  std::variant<ImpactSurface, ResetAction> action;
  /// Negative: SimConfig.deadtime.
  double deadtime = -1;
};

/// Signal `signal` read at t - delay; `derivative` reads its time
/// derivative instead of its value.
struct DelayChannel {
  int signal = 0;
  ParamExpr delay;
  bool derivative = false;
};

struct StateClamp {
  int state = 0;
  double lo = 0, hi = 0;
};

/// Where the sensitivity blocks of an extended model live.
struct SensitivityLayout {
  int base_n = 0, base_nz = 0, base_ny = 0, base_signals = 0, base_delays = 0;
  std::vector<int> params;  // indices into OdeModel::param_names
};

/// Flattened hybrid model.
///
/// dynamics: [x (n), t, theta (p), d (delays), z (nz), hits (rates)]
///        -> [f (n), y (ny), s (signals), z+ (nz)]
/// setup:    [theta] -> [x0 (n), z0 (nz), t_start, prehistory (signals)]
///
/// `hits` are 1 at the sampling instants of each rate, where z+ is
/// applied; between instants they are 0 and discrete outputs hold.
struct OdeModel {
  int n = 0;
  int nz = 0;
  int num_signals = 0;
  std::vector<std::string> param_names;
  std::vector<double> theta;
  std::vector<std::string> state_names;
  std::vector<std::string> discrete_names;
  std::vector<std::string> output_names;
  std::vector<double> rates;
  std::vector<DelayChannel> delays;
  Tape dynamics;
  Tape setup;
  /// Otherwise integration starts at SimConfig::t0.
  bool has_start = false;
  std::vector<EventSpec> events;
  std::vector<StateClamp> clamps;
  std::optional<SensitivityLayout> sensitivity;
  std::vector<std::string> warnings;

  int ny() const { return static_cast<int>(output_names.size()); }
  int np() const { return static_cast<int>(param_names.size()); }
  int param_index(const std::string& name) const;  // throws UnknownParameter
  int output_index(const std::string& name) const;  // -1 if absent
  void set_param(const std::string& name, double value);
  ParamValues param_values() const;

  /// Input layout offsets of the dynamics tape.
  int in_t() const { return n; }
  int in_theta() const { return n + 1; }
  int in_delay() const { return n + 1 + np(); }
  int in_z() const { return in_delay() + static_cast<int>(delays.size()); }
  int in_hits() const { return in_z() + nz; }
  int dynamics_inputs() const { return in_hits() + static_cast<int>(rates.size()); }
};

/// Hand-written models: the callback fills `f` and `outputs` from the
/// recorder variables.
struct OdeContext {
  Recorder& rec;
  std::vector<Var> x;
  Var t;
  std::vector<Var> delayed;
  std::vector<Var> f;
  std::vector<std::pair<std::string, Var>> outputs;
  Var param(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Var> theta_;
};

/// State `state` delayed by `delay`; `prehistory` is its value before the
/// start time.
struct DelaySpec {
  int state = 0;
  ParamExpr delay;
  ParamExpr prehistory;
};

struct OdeDefinition {
  std::vector<std::string> states;
  std::vector<std::pair<std::string, double>> params;
  std::vector<ParamExpr> initial;
  std::optional<ParamExpr> start_time;
  std::vector<DelaySpec> delays;
  std::function<void(OdeContext&)> rhs;
};

OdeModel make_ode(const OdeDefinition& def);

/// Context for guards, resets and impact surfaces.
struct EventContext {
  Recorder& rec;
  std::vector<Var> x;  // full state for guards/resets; q for surfaces
  Var t;
  Var param(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Var> theta_;
};

EventSpec make_reset_event(const OdeModel& m, std::string name, const std::function<Var(EventContext&)>& guard,
                           const std::function<std::vector<Var>(EventContext&)>& reset);

struct ImpactDefinition {
  std::vector<int> q, v;
  std::function<std::vector<Var>(EventContext&)> metric;  // row-major m*m
  std::function<Var(EventContext&)> guard;
  std::function<std::pair<Var, Var>(EventContext&)> potential;
};

ImpactSurface make_impact_surface(const OdeModel& m, const ImpactDefinition& def);
EventSpec make_impact_event(const OdeModel& m, std::string name, ImpactSurface s);

/// Diagram -> state-space form. Integrators, transfer functions and
/// state-space blocks become states (controllable canonical form for
/// transfer functions); discrete blocks become discrete states plus a
/// held output; switches become branch nodes; transport delays become
/// delay channels. Throws ValidationError.
OdeModel flatten(const Diagram& d);

// ---------------------------------------------------------------------------
// Simulation

struct EventRecord {
  double t = 0;
  int event = 0;
  std::vector<double> pre, post;  // continuous states
  std::vector<double> z;          // discrete states
  std::vector<double> y_pre, y_post;
  bool rebound = false;
};

struct Trajectory {
  std::vector<std::string> state_names;  // continuous then discrete
  std::vector<std::string> output_names;
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;
  std::vector<EventRecord> events;

  int output_column(const std::string& name) const;  // throws Error
  int state_column(const std::string& name) const;   // throws Error
  std::vector<double> output(const std::string& name) const;
  std::vector<double> state(const std::string& name) const;
  /// Header `t,<states>,<outputs>`, 17 significant digits; each event adds
  /// a pre and a post row at the event time.
  std::string to_csv() const;
};

/// Fixed-step march with event localization. Throws SimulationError
/// subclasses and EvalDomainError (with the time in the message).
Trajectory integrate(const OdeModel& m, const SimConfig& c);

/// One explicit step from the initial state with the step size h as a jet
/// variable at 0: coefficient i of state j is (d^i/dh^i x_j(t0 + h)) / i!
/// as produced by the scheme. Continuous models without delays, discrete
/// states or events only.
std::vector<Jet> step_jet(const OdeModel& m, Method method, int order);

/// Sensitivity equations for the named parameters: states, discrete
/// states, outputs and delayed signals gain d<name>/d<theta> companions.
OdeModel sensitivity_extend(const OdeModel& m, const std::vector<std::string>& thetas);
OdeModel sensitivity_extend(const OdeModel& m, const std::string& theta);
/// Same construction; named for delay models.
OdeModel dde_extend(const OdeModel& m, const std::string& theta);

/// Replaces impact events by the smoothed potential force
/// -1/2 A^-1 (E2 - E1) H_a'(f) grad f, with H_a = smooth_heaviside.
OdeModel smooth_impacts(const OdeModel& m, double a);

double smooth_heaviside(double a, double x);

// ---------------------------------------------------------------------------
// Impact law

struct ImpactResult {
  Eigen::VectorXd v;
  bool rebound = false;
  /// Kinetic energies in the frame moving with the surface, and the
  /// potentials on the incoming and outgoing sides.
  double kinetic_pre = 0, kinetic_post = 0;
  double potential_pre = 0, potential_post = 0;
  double normal_pre = 0, normal_post = 0, surface_speed = 0;
};

/// Velocity jump for kinetic metric A, guard gradient grad f (w.r.t. q),
/// guard time derivative f_t and side potentials (e_neg on f < 0).
/// Throws SingularMetric, NonTransversal.
ImpactResult impact_law(const Eigen::MatrixXd& A, const Eigen::VectorXd& grad, double ft, double e_neg,
                        double e_pos, const Eigen::VectorXd& v);

/// Tape [x (n), t, theta (np)] -> x+ with the impact law applied to the
/// surface's velocity states; differentiable on either branch.
Tape impact_map_tape(const ImpactSurface& s, int n, int np);

ImpactResult impact_update(const ImpactSurface& s, std::span<const double> q, std::span<const double> v, double t,
                           std::span<const double> theta);

}  // namespace hybridad
