#include "dualsddp/primal.hpp"

#include <cmath>
#include <string>

#include "json.hpp"

#include "dualsddp/errors.hpp"
#include "dualsddp/simplex.hpp"

namespace dualsddp {

namespace {

std::string idx(const std::string& base, int j) { return base + "[" + std::to_string(j) + "]"; }
std::string idx2(const std::string& base, int j, int i) {
  return base + "[" + std::to_string(j) + "][" + std::to_string(i) + "]";
}

}  // namespace

PrimalStageLp build_primal_stage_lp(const Instance& inst, int stage, const Vec& x_prev,
                                    const PrimalCutPool& next_cuts) {
  const Stage& st = inst.stage(stage);
  const int J = st.num_realizations();
  const int nx = st.state_dim();
  const int ny = st.control_dim();
  const int m = st.row_count();
  const bool terminal = stage + 1 == inst.horizon;
  const double next_floor =
      terminal ? 0.0 : inst.stage(stage + 1).value_floor.value_or(0.0);

  PrimalStageLp out;
  LinearProgram& lp = out.lp;

  // Risk head: expectation, Rockafellar-Uryasev, or vertex form. The risk
  // weight of realization j lands on theta_j's objective coefficient (and on
  // the q/u machinery for the AV@R part).
  const RiskSpec& risk = st.risk;
  const bool expectation = risk.type == RiskSpec::Type::MeanAvar && risk.beta == 1.0;
  const bool ru_form = risk.type == RiskSpec::Type::MeanAvar && risk.beta < 1.0;

  int q_var = -1;
  std::vector<int> u_vars;
  int z_var = -1;
  if (ru_form) {
    q_var = lp.add_variable("q", -kInf, kInf, 1.0 - risk.beta);
  } else if (risk.type == RiskSpec::Type::Polyhedral) {
    z_var = lp.add_variable("z", -kInf, kInf, 1.0);
  }

  out.x_vars.resize(static_cast<std::size_t>(J));
  out.y_vars.resize(static_cast<std::size_t>(J));
  out.theta_vars.resize(static_cast<std::size_t>(J));
  out.dyn_rows.resize(static_cast<std::size_t>(J));
  std::vector<int> w_vars(static_cast<std::size_t>(J));

  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
    const double pj = real.probability;

    double theta_cost = 0.0;
    if (expectation) {
      theta_cost = pj;
    } else if (ru_form) {
      theta_cost = risk.beta * pj;
    }
    out.theta_vars[static_cast<std::size_t>(j)] =
        lp.add_variable(idx("theta", j), -kInf, kInf, theta_cost);
    if (ru_form) {
      u_vars.push_back(lp.add_variable(idx("u", j), 0.0, kInf,
                                       (1.0 - risk.beta) / risk.alpha * pj));
    }

    auto& xj = out.x_vars[static_cast<std::size_t>(j)];
    for (int i = 0; i < nx; ++i) {
      xj.push_back(lp.add_variable(idx2("x", j, i), 0.0, st.xbar[static_cast<std::size_t>(i)], 0.0));
    }
    auto& yj = out.y_vars[static_cast<std::size_t>(j)];
    for (int k = 0; k < ny; ++k) {
      yj.push_back(lp.add_variable(idx2("y", j, k), 0.0, st.ybar[static_cast<std::size_t>(k)], 0.0));
    }
    w_vars[static_cast<std::size_t>(j)] = lp.add_variable(idx("w", j), -kInf, kInf, 0.0);
  }

  if (ru_form) {
    for (int j = 0; j < J; ++j) {
      lp.add_row(idx("ru", j), RowSense::GreaterEqual, 0.0,
                 {{q_var, 1.0},
                  {u_vars[static_cast<std::size_t>(j)], 1.0},
                  {out.theta_vars[static_cast<std::size_t>(j)], -1.0}});
    }
  } else if (risk.type == RiskSpec::Type::Polyhedral) {
    for (std::size_t k = 0; k < risk.vertices.size(); ++k) {
      std::vector<std::pair<int, double>> coeffs{{z_var, 1.0}};
      for (int j = 0; j < J; ++j) {
        const double q = risk.vertices[k][static_cast<std::size_t>(j)];
        if (q != 0.0) coeffs.push_back({out.theta_vars[static_cast<std::size_t>(j)], -q});
      }
      lp.add_row("vertex[" + std::to_string(k) + "]", RowSense::GreaterEqual, 0.0,
                 std::move(coeffs));
    }
  }

  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];

    // theta_j >= c^T y_j + w_j   [gamma_j]
    std::vector<std::pair<int, double>> epi{{out.theta_vars[static_cast<std::size_t>(j)], 1.0},
                                            {w_vars[static_cast<std::size_t>(j)], -1.0}};
    for (int k = 0; k < ny; ++k) {
      const double c = real.c[static_cast<std::size_t>(k)];
      if (c != 0.0) epi.push_back({out.y_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], -c});
    }
    out.epi_rows.push_back(lp.add_row(idx("epi", j), RowSense::GreaterEqual, 0.0, std::move(epi)));

    // Future-value model: the declared floor plus one row per cut.
    lp.add_row(idx("floor", j), RowSense::GreaterEqual, next_floor,
               {{w_vars[static_cast<std::size_t>(j)], 1.0}});
    for (std::size_t k = 0; k < next_cuts.size(); ++k) {
      const PrimalCut& cut = next_cuts[k];
      std::vector<std::pair<int, double>> coeffs{{w_vars[static_cast<std::size_t>(j)], 1.0}};
      for (int i = 0; i < nx; ++i) {
        const double g = cut.slope[static_cast<std::size_t>(i)];
        if (g != 0.0) coeffs.push_back({out.x_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], -g});
      }
      lp.add_row("cut[" + std::to_string(j) + "][" + std::to_string(k) + "]",
                 RowSense::GreaterEqual, cut.intercept, std::move(coeffs));
    }

    // Dynamics A x_j + T y_j = d - B x_prev.
    Vec rhs = real.d;
    {
      Vec shift(static_cast<std::size_t>(m), 0.0);
      real.B.multiply_add(x_prev, shift);
      for (int r = 0; r < m; ++r) rhs[static_cast<std::size_t>(r)] -= shift[static_cast<std::size_t>(r)];
    }
    std::vector<std::vector<std::pair<int, double>>> row_coeffs(static_cast<std::size_t>(m));
    for (const Triplet& t : real.A.entries) {
      row_coeffs[static_cast<std::size_t>(t.row)].push_back(
          {out.x_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.col)], t.value});
    }
    for (const Triplet& t : real.T.entries) {
      row_coeffs[static_cast<std::size_t>(t.row)].push_back(
          {out.y_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.col)], t.value});
    }
    for (int r = 0; r < m; ++r) {
      out.dyn_rows[static_cast<std::size_t>(j)].push_back(
          lp.add_row("dyn[" + std::to_string(j) + "][" + std::to_string(r) + "]", RowSense::Equal,
                     rhs[static_cast<std::size_t>(r)], std::move(row_coeffs[static_cast<std::size_t>(r)])));
    }
  }
  return out;
}

PrimalStageResult solve_stage_and_cut(const Instance& inst, int stage, const Vec& x_prev,
                                      const PrimalCutPool& next_cuts, double lp_tol,
                                      int iteration) {
  const Stage& st = inst.stage(stage);
  const int J = st.num_realizations();
  const int nx = st.state_dim();
  const int ny = st.control_dim();
  const int prev_dim = st.prev_state_dim();

  PrimalStageLp built = build_primal_stage_lp(inst, stage, x_prev, next_cuts);
  const LpSolution sol = solve_lp(built.lp, lp_tol);
  if (sol.status != SolveStatus::Optimal) {
    throw SolverError("primal stage " + std::to_string(stage) + " LP " +
                      (sol.status == SolveStatus::Infeasible ? "infeasible" : "unbounded") +
                      " (recourse assumption violated?)");
  }

  PrimalStageResult out;
  out.value = sol.objective;

  // Cut slope: marginal of the incoming state through the dynamics rows,
  // g = -sum_j B_j^T lambda_j with lambda the row duals of d - B x_prev.
  Vec slope(static_cast<std::size_t>(prev_dim), 0.0);
  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
    Vec lambda(static_cast<std::size_t>(st.row_count()));
    for (int r = 0; r < st.row_count(); ++r) {
      lambda[static_cast<std::size_t>(r)] =
          sol.row_duals[static_cast<std::size_t>(built.dyn_rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)])];
    }
    Vec bt(static_cast<std::size_t>(prev_dim), 0.0);
    real.B.transpose_multiply_add(lambda, bt);
    for (int i = 0; i < prev_dim; ++i) slope[static_cast<std::size_t>(i)] -= bt[static_cast<std::size_t>(i)];
  }
  out.cut.stage = stage;
  out.cut.slope = slope;
  out.cut.intercept = out.value - dot(slope, x_prev);
  out.cut.iteration = iteration;
  out.cut.trial_point = x_prev;

  out.next_states.resize(static_cast<std::size_t>(J));
  out.controls.resize(static_cast<std::size_t>(J));
  out.gamma.gamma.resize(static_cast<std::size_t>(J));
  out.gamma.total = 0.0;
  for (int j = 0; j < J; ++j) {
    Vec& xs = out.next_states[static_cast<std::size_t>(j)];
    xs.resize(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i) {
      xs[static_cast<std::size_t>(i)] =
          sol.x[static_cast<std::size_t>(built.x_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])];
    }
    Vec& ys = out.controls[static_cast<std::size_t>(j)];
    ys.resize(static_cast<std::size_t>(ny));
    for (int k = 0; k < ny; ++k) {
      ys[static_cast<std::size_t>(k)] =
          sol.x[static_cast<std::size_t>(built.y_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)])];
    }
    const double g =
        sol.row_duals[static_cast<std::size_t>(built.epi_rows[static_cast<std::size_t>(j)])];
    out.gamma.gamma[static_cast<std::size_t>(j)] = g;
    out.gamma.total += g;
  }
  return out;
}

namespace {
const PrimalCutPool kNoCuts;
}  // namespace

PrimalSddp::PrimalSddp(const Instance& inst, std::uint64_t seed, double lp_tol)
    : inst_(&inst), lp_tol_(lp_tol), rng_(seed), pools_(static_cast<std::size_t>(inst.horizon)) {}

double PrimalSddp::lower_bound() const {
  const PrimalCutPool& next = inst_->horizon > 1 ? pools_[1] : kNoCuts;
  return solve_stage_and_cut(*inst_, 0, inst_->x0, next, lp_tol_, iteration_).value;
}

double PrimalSddp::iterate() {
  const int T = inst_->horizon;
  ++iteration_;

  // Forward pass: sample one trajectory under the reference measure.
  PrimalTrajectory traj;
  Vec x = inst_->x0;
  for (int s = 0; s < T; ++s) {
    const Stage& st = inst_->stage(s);
    const PrimalCutPool& next = s + 1 < T ? pools_[static_cast<std::size_t>(s) + 1] : kNoCuts;
    PrimalStageResult res = solve_stage_and_cut(*inst_, s, x, next, lp_tol_, iteration_);
    Vec probs(static_cast<std::size_t>(st.num_realizations()));
    for (int j = 0; j < st.num_realizations(); ++j) {
      probs[static_cast<std::size_t>(j)] = st.realizations[static_cast<std::size_t>(j)].probability;
    }
    const int pick = rng_.sample_weights(probs);
    PrimalTrajectoryStep step;
    step.incoming = x;
    step.realization = pick;
    step.controls = res.controls[static_cast<std::size_t>(pick)];
    step.outgoing = res.next_states[static_cast<std::size_t>(pick)];
    step.stage_cost = dot(st.realizations[static_cast<std::size_t>(pick)].c, step.controls);
    traj.push_back(step);
    x = step.outgoing;
  }
  trajectories_.push_back(traj);

  // Backward pass: refresh cuts stage by stage; the stage-0 solve is the
  // exact lower bound under the updated pools.
  double lb = 0.0;
  for (int s = T - 1; s >= 0; --s) {
    const PrimalCutPool& next = s + 1 < T ? pools_[static_cast<std::size_t>(s) + 1] : kNoCuts;
    PrimalStageResult res =
        solve_stage_and_cut(*inst_, s, traj[static_cast<std::size_t>(s)].incoming, next, lp_tol_,
                            iteration_);
    pools_[static_cast<std::size_t>(s)].push_back(res.cut);
    if (s == 0) lb = res.value;
  }
  return lb;
}

PrimalRunResult run_primal(const Instance& inst, int iters, std::uint64_t seed, double lp_tol) {
  PrimalSddp sddp(inst, seed, lp_tol);
  PrimalRunResult out;
  out.lb_series.push_back(sddp.lower_bound());
  for (int k = 0; k < iters; ++k) out.lb_series.push_back(sddp.iterate());
  out.pools = sddp.pools();
  out.trajectories = sddp.trajectories();
  return out;
}

std::string primal_cuts_to_json(const std::vector<PrimalCutPool>& pools) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const PrimalCutPool& pool : pools) {
    for (const PrimalCut& c : pool) {
      nlohmann::ordered_json jc;
      jc["stage"] = c.stage;
      jc["slope"] = c.slope;
      jc["intercept"] = c.intercept;
      jc["iteration"] = c.iteration;
      root.push_back(std::move(jc));
    }
  }
  return root.dump(2) + "\n";
}

std::vector<PrimalCutPool> primal_cuts_from_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid cut JSON: ") + e.what());
  }
  int max_stage = -1;
  for (const auto& jc : root) max_stage = std::max(max_stage, jc.at("stage").get<int>());
  std::vector<PrimalCutPool> pools(static_cast<std::size_t>(max_stage + 1));
  for (const auto& jc : root) {
    PrimalCut c;
    c.stage = jc.at("stage").get<int>();
    c.slope = jc.at("slope").get<Vec>();
    c.intercept = jc.at("intercept").get<double>();
    c.iteration = jc.value("iteration", 0);
    pools[static_cast<std::size_t>(c.stage)].push_back(std::move(c));
  }
  return pools;
}

}  // namespace dualsddp
