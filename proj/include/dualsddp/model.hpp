#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dualsddp/risk.hpp"
#include "dualsddp/sparse.hpp"

namespace dualsddp {

/// One realization of a stage: equality dynamics
///   A x_t + B x_{t-1} + T y_t = d
/// with stage cost c^T y_t and reference probability p. Row count m may
/// exceed the state dimension (extra rows host balance constraints).
struct StageRealization {
  double probability = 1.0;
  SparseMatrix A;  // m x n_x (current state)
  SparseMatrix B;  // m x n_x_prev (previous state)
  SparseMatrix T;  // m x n_y (controls)
  Vec d;           // length m
  Vec c;           // length n_y
};

/// Risk specification as written in the instance schema.
struct RiskSpec {
  enum class Type { MeanAvar, Polyhedral };
  Type type = Type::MeanAvar;
  double alpha = 1.0;          // mean_avar only
  double beta = 1.0;           // mean_avar only
  std::vector<Vec> vertices;   // polyhedral only
};

/// Stages are indexed 0..T-1. Stage s consumes the state produced by stage
/// s-1 (stage 0 consumes x0) and produces a state bounded by [0, xbar].
/// lipschitz bounds, componentwise, the slope of the cost-to-go of stages
/// s..T-1 with respect to the incoming state; its length is the incoming
/// state dimension.
struct Stage {
  std::vector<StageRealization> realizations;
  Vec xbar;       // outgoing state upper bound, length n_x
  Vec ybar;       // control upper bound, length n_y
  Vec lipschitz;  // length n_x_prev
  RiskSpec risk;
  // Declared lower bound on the cost-to-go of stages s..T-1 (any incoming
  // state). The default zero initial model is valid only for nonnegative
  // stage costs; instances with negative costs must declare this.
  std::optional<double> value_floor;

  int state_dim() const { return static_cast<int>(xbar.size()); }
  int control_dim() const { return static_cast<int>(ybar.size()); }
  int prev_state_dim() const {
    return realizations.empty() ? 0 : realizations.front().B.cols;
  }
  int row_count() const {
    return realizations.empty() ? 0 : static_cast<int>(realizations.front().d.size());
  }
  int num_realizations() const { return static_cast<int>(realizations.size()); }

  /// Envelope of this stage's risk measure over its realizations.
  RiskEnvelope envelope() const;
};

struct Instance {
  std::string name;
  std::string description;
  int horizon = 0;  // T
  Vec x0;
  std::vector<Stage> stages;

  const Stage& stage(int s) const { return stages[static_cast<std::size_t>(s)]; }
};

struct TreeNode {
  int id = 0;
  int depth = 0;
  int parent = -1;            // -1 for the root
  int realization = -1;       // index within the parent's stage; -1 for the root
  double path_probability = 1.0;
};

/// Lists every violated invariant with its location. An empty report means
/// the instance is accepted by every other module.
std::vector<std::string> validate_instance(const Instance& inst);

/// Full scenario tree down to depth t_max (root at depth 0; depth k nodes
/// pick realizations of stage k-1). Nodes are emitted breadth-first, parents
/// before children, realizations in index order. Throws BudgetError naming
/// the offending product when the node count would exceed node_budget.
std::vector<TreeNode> enumerate_tree(const Instance& inst, int t_max, long node_budget = 4000);

/// Heuristic per-stage Lipschitz suggestion: the largest absolute cost
/// coefficient anywhere in the instance times the number of remaining
/// stages, uniform across components. An overestimate is always safe for
/// the dual state box; users may override per stage.
std::vector<Vec> estimate_lipschitz(const Instance& inst);

}  // namespace dualsddp
