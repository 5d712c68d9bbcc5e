#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualsddp/lp.hpp"
#include "dualsddp/model.hpp"
#include "dualsddp/rng.hpp"

namespace dualsddp {

/// Affine underestimator of the stage-s cost-to-go as a function of the
/// incoming state: V_s(x) >= slope^T x + intercept.
struct PrimalCut {
  int stage = 0;
  Vec slope;
  double intercept = 0.0;
  int iteration = 0;
  Vec trial_point;
};

using PrimalCutPool = std::vector<PrimalCut>;

struct PrimalTrajectoryStep {
  Vec incoming;
  int realization = -1;
  Vec controls;
  Vec outgoing;
  double stage_cost = 0.0;
};
using PrimalTrajectory = std::vector<PrimalTrajectoryStep>;

/// Stage LP for V_s at a fixed incoming state: per-realization decisions,
/// epigraph variables theta_j, a future-value variable w_j modeled by the
/// cut pool (plus the declared stage value floor), and the risk head in
/// Rockafellar-Uryasev form for mean-AV@R or vertex form for polyhedral
/// envelopes.
struct PrimalStageLp {
  LinearProgram lp;
  std::vector<std::vector<int>> x_vars;  // [realization][state component]
  std::vector<std::vector<int>> y_vars;  // [realization][control]
  std::vector<int> theta_vars;
  std::vector<int> epi_rows;             // theta_j >= c^T y_j + w_j rows [gamma_j]
  std::vector<std::vector<int>> dyn_rows;
};

PrimalStageLp build_primal_stage_lp(const Instance& inst, int stage, const Vec& x_prev,
                                    const PrimalCutPool& next_cuts);

struct PrimalStageResult {
  double value = 0.0;
  PrimalCut cut;
  std::vector<Vec> next_states;  // per realization
  std::vector<Vec> controls;     // per realization
  ChangeOfMeasure gamma;         // from the theta-row multipliers
};

/// Solves the stage LP and assembles the cut (tight at x_prev) and the
/// risk-adjusted change of measure.
PrimalStageResult solve_stage_and_cut(const Instance& inst, int stage, const Vec& x_prev,
                                      const PrimalCutPool& next_cuts, double lp_tol = 1e-9,
                                      int iteration = 0);

/// Risk-averse primal SDDP. Forward passes sample under the reference
/// measure; each backward pass adds one cut per stage and its stage-0 solve
/// is the exact lower bound. Deterministic given the seed.
class PrimalSddp {
 public:
  PrimalSddp(const Instance& inst, std::uint64_t seed, double lp_tol = 1e-9);

  /// One forward + backward pass; returns the refreshed lower bound.
  double iterate();

  /// Stage-0 value under the current cut pools (no new cuts).
  double lower_bound() const;

  int iterations_done() const { return iteration_; }
  const std::vector<PrimalCutPool>& pools() const { return pools_; }
  const std::vector<PrimalTrajectory>& trajectories() const { return trajectories_; }

 private:
  const Instance* inst_;
  double lp_tol_;
  DeterministicRng rng_;
  int iteration_ = 0;
  std::vector<PrimalCutPool> pools_;
  std::vector<PrimalTrajectory> trajectories_;
};

struct PrimalRunResult {
  Vec lb_series;  // lb_series[k] = lower bound after k iterations
  std::vector<PrimalCutPool> pools;
  std::vector<PrimalTrajectory> trajectories;
};

PrimalRunResult run_primal(const Instance& inst, int iters, std::uint64_t seed,
                           double lp_tol = 1e-9);

std::string primal_cuts_to_json(const std::vector<PrimalCutPool>& pools);
std::vector<PrimalCutPool> primal_cuts_from_json(const std::string& text);

}  // namespace dualsddp
