#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualsddp/lp.hpp"
#include "dualsddp/model.hpp"
#include "dualsddp/rng.hpp"

namespace dualsddp {

/// Dual state at stage s: price vector conjugate to the stage-(s-1)
/// outgoing state plus the risk-adjusted probability mass.
struct DualState {
  int stage = 0;
  Vec pi;
  double gamma = 1.0;
};

/// Homogeneous linear overestimator of the concave dual value function:
/// D_s(pi, gamma) <= x_slope^T pi + z_slope * gamma. The intercept is
/// identically zero (cuts of a degree-1 homogeneous function).
struct DualCut {
  int stage = 0;
  Vec x_slope;
  double z_slope = 0.0;
  int iteration = 0;
};

/// Per-stage cut pools defining the upper model
/// D̂_s(pi, gamma) = min over cuts of x^T pi + z * gamma.
/// The terminal stage T is the closed form and never stored as cuts.
class DualApprox {
 public:
  DualApprox() = default;
  explicit DualApprox(int horizon) : cuts_(static_cast<std::size_t>(horizon)) {}

  void add(DualCut cut) { cuts_[static_cast<std::size_t>(cut.stage)].push_back(std::move(cut)); }
  const std::vector<std::vector<DualCut>>& by_stage() const { return cuts_; }
  int horizon() const { return static_cast<int>(cuts_.size()); }

  /// Min over stored cuts; +inf when the pool is empty.
  double eval(int stage, const Vec& pi, double gamma) const;

 private:
  std::vector<std::vector<DualCut>> cuts_;
};

/// D_T(pi, gamma) = -xbar_T^T max(pi, 0); independent of gamma.
double terminal_dual_value(const Vec& pi, double gamma, const Vec& xbar_terminal);

struct DualStageLp {
  LinearProgram lp;
  std::vector<int> pi_rows;  // rows carrying the incoming pi (cut x-multipliers)
  int mass_row = -1;         // envelope mass row (cut z-multiplier)
  std::vector<std::vector<int>> next_pi_vars;  // [realization][component]
  std::vector<int> next_gamma_vars;            // [realization]
  std::vector<int> pi0_vars;                   // first-stage fusion only
};

/// Stage problem of the compactified dual recursion at stage s >= 1 for the
/// incoming state (pi, gamma): variables zeta, lambda_j, pi_j, gamma_j,
/// xi_j, the envelope block gamma in gamma_s * Q, the coupling row
/// zeta + sum_j B_j^T lambda_j >= pi, per-realization price links
/// pi_j + A_j^T lambda_j = 0, control rows gamma_j c_j + T_j^T lambda_j +
/// xi_j >= 0, and the Lipschitz box |pi_j| <= gamma_j L_{s+1}. The next
/// stage enters through hypograph variables bounded by its cuts, or through
/// the exact terminal encoding s_i >= pi_j_i, s_i >= 0 with value
/// -xbar^T s when s + 1 == T.
DualStageLp build_dual_stage_lp(const Instance& inst, int stage, const DualState& state,
                                const DualApprox& approx);

/// First-stage fusion: pi_0 is a decision variable bounded by |pi_0| <= L_0
/// tied by sum_j B_j^T lambda_j = pi_0, the objective gains pi_0^T x0, and
/// the envelope mass is fixed at 1. Its optimal value is the reported upper
/// bound on the primal problem.
DualStageLp build_dual_first_stage_lp(const Instance& inst, const DualApprox& approx);

struct DualStageSolve {
  double value = 0.0;
  DualCut cut;
  std::vector<DualState> next_states;  // per realization, not normalized
  Vec gammas;
  double sanity_residual = 0.0;  // |v - x^T pi - z gamma| / (1 + |v|)
  Vec pi0;                       // first-stage fusion only
};

DualStageSolve solve_dual_stage(const Instance& inst, int stage, const DualState& state,
                                const DualApprox& approx, double lp_tol, int iteration);
DualStageSolve solve_dual_first_stage(const Instance& inst, const DualApprox& approx,
                                      double lp_tol, int iteration);

/// (upper bound, argmax pi_0) under the current approximation.
std::pair<double, Vec> solve_first_stage(const Instance& inst, const DualApprox& approx,
                                         double lp_tol = 1e-9);

/// Smoothed importance sampling: index j with probability
/// (gamma_j + epsilon) / sum_i (gamma_i + epsilon). Rejects all-zero
/// weights when epsilon == 0.
int sample_branch(const Vec& gamma, double epsilon, DeterministicRng& rng);

/// Homogeneity normalization: (pi/gamma, 1) when gamma > round_tol, else
/// (pi, 0) with the mass rounded down to zero.
DualState normalize_state(const DualState& state, double gamma_round_tol);

/// Valid initial upper model: one cut per stage from a single backward
/// sweep at (pi = 0, gamma = 1), from stage T-1 down to stage 1 (the fused
/// first stage consumes the stage-1 pool directly). Every approximation is
/// finite on its Lipschitz box and the first-stage problem is bounded.
DualApprox init_upper_approx(const Instance& inst, double lp_tol = 1e-9);

struct DualOptions {
  std::uint64_t seed = 1;
  double epsilon = -1.0;          // < 0: per-stage default 1e-2 / J_t
  double gamma_round_tol = 1e-9;
  double sanity_tol = 1e-6;
  double lp_tol = 1e-9;
  bool backward_pass = false;     // optional extra cut pass per iteration
  std::ostream* log = nullptr;
};

/// Forward-only dual SDDP on the compactified recursion. Each iteration
/// solves the fused first stage (which is the reported, nonincreasing upper
/// bound and yields the stage-0 cut and branch states), then walks forward
/// adding one cut per stage from the (pi, gamma) row multipliers, sampling
/// branches with gamma_j + epsilon weights and normalizing states.
class DualSddp {
 public:
  DualSddp(const Instance& inst, DualOptions options);

  /// One iteration; returns the upper bound from this iteration's
  /// first-stage solve (before the forward pass it triggers).
  double iterate();

  /// First-stage value under the current cuts (adds nothing).
  double upper_bound() const;

  const DualApprox& approx() const { return approx_; }
  const std::vector<std::vector<DualState>>& visited() const { return visited_; }
  long stage_solves() const { return stage_solves_; }
  long sanity_warnings() const { return sanity_warnings_; }
  int iterations_done() const { return iteration_; }

 private:
  void record_solve(const DualStageSolve& solve);

  const Instance* inst_;
  DualOptions opts_;
  DeterministicRng rng_;
  DualApprox approx_;
  std::vector<std::vector<DualState>> visited_;  // per iteration, stages 1..T-1
  int iteration_ = 0;
  long stage_solves_ = 0;
  long sanity_warnings_ = 0;
};

/// Optional backward mode: re-solves stages T-1..1 at the visited states of
/// one forward pass with the freshest downstream cuts, then refreshes the
/// first-stage cut. The first-stage value never increases as a result.
void dual_backward_pass(const Instance& inst, const std::vector<DualState>& visited,
                        DualApprox& approx, const DualOptions& options, int iteration);

struct DualRunResult {
  Vec ub_series;  // ub_series[k] = first-stage value after k forward passes
  DualApprox approx;
  std::vector<std::vector<DualState>> visited;
  long stage_solves = 0;
  long sanity_warnings = 0;
};

DualRunResult run_dual(const Instance& inst, int iters, DualOptions options = {});

std::string dual_cuts_to_json(const DualApprox& approx);
DualApprox dual_cuts_from_json(const std::string& text);

}  // namespace dualsddp
