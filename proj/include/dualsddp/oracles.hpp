#pragma once

#include <cstdint>
#include <vector>

#include "dualsddp/model.hpp"

namespace dualsddp {

/// Extensive-form solution over the whole scenario tree. Vectors are
/// indexed by node id as produced by enumerate_tree; root entries are
/// empty/zero where a quantity does not exist at the root.
struct ExtensiveSolution {
  double value = 0.0;
  std::vector<TreeNode> tree;
  std::vector<Vec> state;     // outgoing state per node (root: x0)
  std::vector<Vec> controls;  // per node, empty at the root
  Vec node_value;             // z_n (0 at leaves)
  Vec theta;                  // per node, 0 at the root
  std::vector<Vec> lambda;    // dynamics-row duals per node
  Vec gamma;                  // epigraph-row duals per node
  std::vector<Vec> pi;        // state-copy-row duals per node
};

/// Deterministic-equivalent LP over the tree; the optimal value is the
/// risk-adjusted value of the whole problem and serves as the v* oracle.
ExtensiveSolution solve_extensive_primal(const Instance& inst, long node_budget = 4000,
                                         double lp_tol = 1e-9);

/// Exact dual value function D_s(pi, gamma): the nested dual recursion
/// unrolled into one LP over the depth-s subtree. With the Lipschitz rows
/// the compactified recursion is evaluated, without them the plain one.
/// At the root stage (s == 0) the price coupling is the fused equality; at
/// s == horizon the terminal closed form is returned directly.
double exact_dual_value(const Instance& inst, int stage, const Vec& pi, double gamma,
                        long subtree_budget = 4000, bool with_lipschitz_rows = true,
                        double lp_tol = 1e-9);

struct CoperspectiveReport {
  double max_discrepancy = 0.0;
  double tolerance = 0.0;  // L * h, the grid-error bound used as tolerance
  int samples = 0;
  bool pass = false;
};

/// Checks the identity between the dual value function at a stage and the
/// Lipschitz-regularized coperspective of the primal cost-to-go: the primal
/// value is tabulated on a grid of step h via extensive solves, the
/// conjugate is formed on the grid (inner sup over grid states, outer inf
/// over a zeta grid with psi = pi - zeta), and the result is compared with
/// exact_dual_value at sampled in-box states (pi, gamma).
CoperspectiveReport coperspective_check(const Instance& inst, int stage, double grid_h,
                                        int num_samples = 20, std::uint64_t seed = 7,
                                        long node_budget = 4000, double lp_tol = 1e-9);

/// Candidate incoming states per stage. by_stage[s] feeds stage s >= 1;
/// stage 0 is pinned at x0 and needs no trials.
struct TrialPointSet {
  std::vector<std::vector<Vec>> by_stage;
};

struct PhilpottResult {
  double root_upper_bound = 0.0;
  std::vector<Vec> trial_values;  // upper values per stage per trial point
};

/// Deterministic backward upper bound over trial states: each stage value is
/// the risk of the per-realization one-step costs, with the next stage's
/// value function replaced by its Lipschitz inner extension
///   min over simplex weights mu of sum mu_k v_k + L^T |x - sum mu_k x_k|
/// (one LP per evaluation). The root value is a valid upper bound on the
/// problem value whenever the stage Lipschitz constants are valid.
PhilpottResult philpott_upper_bound(const Instance& inst, const TrialPointSet& trials,
                                    double lp_tol = 1e-9);

}  // namespace dualsddp
