#pragma once

#include "dualsddp/lp.hpp"

namespace dualsddp {

struct SimplexOptions {
  double tol = 1e-9;          // feasibility / optimality tolerance (absolute)
  int max_pivots = 2000000;   // hard cap before declaring numerical failure
  int bland_threshold = 40;   // consecutive degenerate pivots before Bland's rule
  int refactor_interval = 2000;
};

/// Reference LP backend: two-phase revised simplex over boxed variables with
/// a dense basis inverse. Dantzig pricing with a Bland's-rule fallback for
/// degeneracy. Deterministic: identical inputs yield identical outputs.
///
/// A solver instance is single-threaded and must not be shared; distinct
/// instances may run concurrently on distinct programs.
class SimplexSolver {
 public:
  explicit SimplexSolver(SimplexOptions options = {}) : options_(options) {}

  /// Solves the program. Throws SolverError if tolerances cannot be met;
  /// never silently returns a wrong status. Optimal solutions are verified
  /// for primal/dual feasibility and strong duality before returning.
  LpSolution solve(const LinearProgram& lp);

 private:
  SimplexOptions options_;
};

/// Convenience wrapper: one-shot solve with a fresh solver.
LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-9);

}  // namespace dualsddp
