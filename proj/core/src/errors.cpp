#include "hybridad/errors.hpp"

#include <sstream>

namespace hybridad {

namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

OrderExceeded::OrderExceeded(int requested, int order)
    : Error("derivative of order " + std::to_string(requested) + " requested from a jet of order " +
            std::to_string(order)) {}

OrderMismatch::OrderMismatch(int a, int b)
    : Error("jet orders differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}

EvalDomainError::EvalDomainError(int node, const std::string& what)
    : Error("node " + std::to_string(node) + ": " + what), node_(node) {}

NonDifferentiablePoint::NonDifferentiablePoint(int node, const std::string& what)
    : Error("node " + std::to_string(node) + ": " + what), node_(node) {}

SchemaError::SchemaError(std::string path, const std::string& what)
    : Error(path + ": " + what), path_(std::move(path)) {}

ParseError::ParseError(std::string text, std::size_t pos, const std::string& what)
    : Error("cannot parse '" + text + "' at " + std::to_string(pos) + ": " + what), pos_(pos) {}

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error("diagram is invalid: " + join(violations, "; ")), violations_(std::move(violations)) {}

UnknownParameter::UnknownParameter(std::string name, const std::vector<std::string>& available)
    : Error("unknown parameter '" + name + "' (available: " + join(available, ", ") + ")"),
      name_(std::move(name)) {}

EventStorm::EventStorm(double t, int count)
    : SimulationError([&] {
        std::ostringstream os;
        os << count << " events within one step near t=" << t;
        return os.str();
      }()) {}

SensitivityAcrossEvent::SensitivityAcrossEvent(double t)
    : SimulationError([&] {
        std::ostringstream os;
        os << "sensitivity states cannot cross the reset event at t=" << t;
        return os.str();
      }()) {}

NonTransversal::NonTransversal(double rate)
    : SimulationError([&] {
        std::ostringstream os;
        os << "trajectory meets the switching surface tangentially (df/dt=" << rate << ")";
        return os.str();
      }()) {}

DelayUnderflow::DelayUnderflow(double query, double earliest)
    : SimulationError([&] {
        std::ostringstream os;
        os << "delayed lookup at t=" << query << " precedes stored history (earliest " << earliest
           << ") and no prehistory is defined";
        return os.str();
      }()) {}

MaxIterExceeded::MaxIterExceeded(int iterations, std::vector<double> best, double best_residual)
    : Error("Newton did not converge in " + std::to_string(iterations) + " iterations"),
      iterations_(iterations),
      best_(std::move(best)),
      best_residual_(best_residual) {}

}  // namespace hybridad
