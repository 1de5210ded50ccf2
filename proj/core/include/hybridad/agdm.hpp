#pragma once

#include <string>
#include <utility>

#include "hybridad/diagram.hpp"

namespace hybridad {

struct AgdmOptions {
  /// Remove structurally zero derivative blocks after the transform.
  bool prune = true;
  /// Lookup tables: exact interpolation slope, or the finite-difference
  /// rule (adds an M5 warning to the diagram).
  blocks::LookupDerivative1D::Mode lookup_mode = blocks::LookupDerivative1D::Mode::slope;
  bool lookup_central = false;
};

/// Graphic differentiation: returns `d` unchanged plus a derivative flow
/// whose blocks are named d(<id>)/d(<theta>) (helpers get a [n] suffix)
/// and annotated "d/d<theta>". Every output gains a companion
/// d<name>/d<theta>. Throws UnknownParameter.
Diagram agdm_diff(const Diagram& d, const std::string& theta, const AgdmOptions& opts = {});

/// d(<id>)/d(<theta>), collapsing d(d(x)/d(t))/d(t) to d2(x)/d(t)2.
std::string derivative_block_name(const std::string& id, const std::string& theta);
/// d<name>/d<theta>, collapsing dy/dt to d2y/dt2.
std::string derivative_output_name(const std::string& name, const std::string& theta);

/// Quotient rule on descending coefficient lists: returns the transfer
/// function (N'D - ND') / D^2, or N'/D when D does not depend on theta.
std::pair<ExprList, ExprList> tf_param_derivative(const ExprList& num, const ExprList& den, const std::string& theta);

struct StateSpaceMatrices {
  ExprMatrix A, B, C, D;
};

/// [[A,0],[dA,A]], [[B,0],[dB,B]], [[C,0],[dC,C]], [[D,0],[dD,D]] acting on
/// stacked (X, dX), (U, dU). Throws DimensionMismatch.
StateSpaceMatrices ss_augment(const StateSpaceMatrices& m, const std::string& theta);

/// Removes blocks whose outputs are structurally zero, shrinking Sum
/// arities and feeding other consumers from a shared zero constant. With
/// `derivative_flow_only`, only annotated blocks are candidates.
Diagram prune_zero(const Diagram& d, bool derivative_flow_only = false);

}  // namespace hybridad
