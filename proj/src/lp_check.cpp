#include "dualsddp/lp_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dualsddp/sparse.hpp"

namespace dualsddp {

SolutionCheck check_solution(const LinearProgram& lp, const LpSolution& sol, double tol) {
  SolutionCheck out;
  std::ostringstream detail;
  if (sol.status != SolveStatus::Optimal || sol.x.size() != static_cast<std::size_t>(lp.num_vars()) ||
      sol.row_duals.size() != static_cast<std::size_t>(lp.num_rows())) {
    out.pass = false;
    out.detail = "solution does not claim optimality or has wrong dimensions";
    return out;
  }

  const double sg = lp.sense() == ObjSense::Minimize ? 1.0 : -1.0;

  // Primal residuals.
  for (const Row& r : lp.rows()) {
    double act = 0.0;
    for (const auto& [j, v] : r.coeffs) act += v * sol.x[static_cast<std::size_t>(j)];
    double viol = 0.0;
    switch (r.sense) {
      case RowSense::Equal:
        viol = std::fabs(act - r.rhs);
        break;
      case RowSense::LessEqual:
        viol = std::max(0.0, act - r.rhs);
        break;
      case RowSense::GreaterEqual:
        viol = std::max(0.0, r.rhs - act);
        break;
    }
    if (viol > out.max_primal_residual) {
      out.max_primal_residual = viol;
      detail.str("");
      detail << "worst primal residual " << viol << " at row '" << r.name << "'";
    }
  }
  for (int j = 0; j < lp.num_vars(); ++j) {
    const Variable& v = lp.var(j);
    const double x = sol.x[static_cast<std::size_t>(j)];
    const double viol = std::max({0.0, v.lower - x, x - v.upper});
    out.max_primal_residual = std::max(out.max_primal_residual, viol);
  }

  // Reduced costs and sign conditions. A variable's position in its box
  // decides which condition applies: interior requires stationarity, a bound
  // requires the matching sign (minimization: at lower => d >= 0, at upper
  // => d <= 0; mirrored by sg for maximization).
  Vec d(static_cast<std::size_t>(lp.num_vars()), 0.0);
  for (int j = 0; j < lp.num_vars(); ++j) d[static_cast<std::size_t>(j)] = lp.var(j).cost;
  for (int i = 0; i < lp.num_rows(); ++i) {
    const double y = sol.row_duals[static_cast<std::size_t>(i)];
    if (y == 0.0) continue;
    for (const auto& [j, v] : lp.row(i).coeffs) d[static_cast<std::size_t>(j)] -= v * y;
  }

  const double pos_tol = tol * 10.0;
  double dual_obj = 0.0;
  for (int i = 0; i < lp.num_rows(); ++i) {
    dual_obj += sol.row_duals[static_cast<std::size_t>(i)] * lp.row(i).rhs;
  }
  for (int j = 0; j < lp.num_vars(); ++j) {
    const Variable& v = lp.var(j);
    const double x = sol.x[static_cast<std::size_t>(j)];
    const double dj = sg * d[static_cast<std::size_t>(j)];  // reduced cost in min convention
    const bool at_lower = std::isfinite(v.lower) && x <= v.lower + pos_tol;
    const bool at_upper = std::isfinite(v.upper) && x >= v.upper - pos_tol;
    double viol = 0.0;
    if (at_lower && at_upper) {
      // fixed variable: any sign admissible
    } else if (at_lower) {
      viol = std::max(0.0, -dj);
    } else if (at_upper) {
      viol = std::max(0.0, dj);
    } else {
      viol = std::fabs(dj);
    }
    if (viol > out.max_dual_residual) {
      out.max_dual_residual = viol;
    }
    if (at_lower) {
      dual_obj += sg * dj * v.lower;
    } else if (at_upper) {
      dual_obj += sg * dj * v.upper;
    }
  }

  double primal_obj = 0.0;
  for (int j = 0; j < lp.num_vars(); ++j) {
    primal_obj += lp.var(j).cost * sol.x[static_cast<std::size_t>(j)];
  }
  out.duality_gap = std::fabs(primal_obj - dual_obj);
  // Also flag a mismatch between the reported and the recomputed objective.
  out.duality_gap = std::max(out.duality_gap, std::fabs(primal_obj - sol.objective));

  const double gap_tol = tol * (1.0 + std::fabs(primal_obj));
  out.pass = out.max_primal_residual <= tol && out.max_dual_residual <= tol &&
             out.duality_gap <= gap_tol;
  if (out.detail.empty()) out.detail = detail.str();
  return out;
}

}  // namespace dualsddp
