#pragma once

#include <string>

#include "dualsddp/lp.hpp"

namespace dualsddp {

/// Diagnostic report for a claimed-optimal solution.
struct SolutionCheck {
  double max_primal_residual = 0.0;  // row violations and bound violations
  double max_dual_residual = 0.0;    // reduced-cost sign / stationarity violations
  double duality_gap = 0.0;          // |c^T x - dual objective with bound terms|
  bool pass = false;
  std::string detail;
};

/// Pure check of a solution that claims to be optimal: recomputes residuals,
/// reduced costs and the duality gap from the program data. Never throws.
SolutionCheck check_solution(const LinearProgram& lp, const LpSolution& sol, double tol = 1e-9);

}  // namespace dualsddp
