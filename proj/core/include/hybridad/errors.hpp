#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hybridad {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- jet ----

class DivisionByZeroConstantTerm : public Error {
 public:
  DivisionByZeroConstantTerm() : Error("jet division by a series with zero constant term") {}
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class OrderExceeded : public Error {
 public:
  OrderExceeded(int requested, int order);
};

class OrderMismatch : public Error {
 public:
  OrderMismatch(int a, int b);
};

// ---- tape ----

class EvalDomainError : public Error {
 public:
  EvalDomainError(int node, const std::string& what);
  int node() const { return node_; }

 private:
  int node_;
};

class NonDifferentiablePoint : public Error {
 public:
  NonDifferentiablePoint(int node, const std::string& what);
  int node() const { return node_; }

 private:
  int node_;
};

class InvalidTape : public Error {
 public:
  using Error::Error;
};

// ---- diagram ----

class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ParseError : public Error {
 public:
  ParseError(std::string text, std::size_t pos, const std::string& what);
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class UnknownParameter : public Error {
 public:
  UnknownParameter(std::string name, const std::vector<std::string>& available);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// ---- sim ----

class SimulationError : public Error {
 public:
  using Error::Error;
};

class EventStorm : public SimulationError {
 public:
  EventStorm(double t, int count);
};

class SensitivityAcrossEvent : public SimulationError {
 public:
  explicit SensitivityAcrossEvent(double t);
};

class SingularMetric : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class NonTransversal : public SimulationError {
 public:
  NonTransversal(double rate);
};

class DelayUnderflow : public SimulationError {
 public:
  DelayUnderflow(double query, double earliest);
};

// ---- solvers / analysis ----

class SingularJacobian : public Error {
 public:
  using Error::Error;
};

class MaxIterExceeded : public Error {
 public:
  MaxIterExceeded(int iterations, std::vector<double> best, double best_residual);
  const std::vector<double>& best_iterate() const { return best_; }
  double best_residual() const { return best_residual_; }
  int iterations() const { return iterations_; }

 private:
  int iterations_;
  std::vector<double> best_;
  double best_residual_;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridad
