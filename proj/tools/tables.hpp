#pragma once

#include <string>
#include <vector>

namespace hybridad::cli {

/// Derivatives of orders 1..orders at h = 0 of one step for f' = -f^2,
/// f(0) = 1, next to the exact solution 1/(1 + h).
struct Rk4Table {
  std::vector<double> exact, midpoint, rk4;
};
Rk4Table rk4_table(int orders = 11);

/// d2/da2 sqrt(a) at a = 1.5: the derivative rule -1/(4 g^3) evaluated at
/// the loose-tolerance iterate g(1.5, 1e-4, 1.00001), the same iteration
/// run on jets, and the exact value. Also the order-19 coefficient of
/// Newton on jets at a = 2.
struct NewtonSqrtTable {
  double procedure_root = 0;
  double procedure_rule = 0;
  double through_loop = 0;
  double exact = 0;
  double jet3 = 0;
  double jet_converged = 0;
  int jet_converged_iterations = 0;
  double jet_exact = 0;
};
NewtonSqrtTable newton_sqrt_table();

struct WarmStartRow {
  double tol;
  double constant_fraction;
};
/// sqrt on the grid 0.1..2 with step 1e-3.
std::vector<WarmStartRow> warmstart_table(const std::vector<double>& tols = {5e-2, 1e-14});

std::string render_rk4(const Rk4Table& t);
std::string render_newton_sqrt(const NewtonSqrtTable& t);
std::string render_warmstart(const std::vector<WarmStartRow>& rows);

}  // namespace hybridad::cli
