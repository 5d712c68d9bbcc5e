#include "dualsddp/dual.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
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

double DualApprox::eval(int stage, const Vec& pi, double gamma) const {
  const auto& pool = cuts_[static_cast<std::size_t>(stage)];
  double best = kInf;
  for (const DualCut& c : pool) {
    const double v = dot(c.x_slope, pi) + c.z_slope * gamma;
    best = std::min(best, v);
  }
  return best;
}

double terminal_dual_value(const Vec& pi, double gamma, const Vec& xbar_terminal) {
  (void)gamma;
  double v = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    v -= xbar_terminal[i] * std::max(pi[i], 0.0);
  }
  return v;
}

namespace {

// Shared construction of the dual stage LP. For stage >= 1 the incoming
// state enters as right-hand sides; for the fused first stage pi_0 is a
// boxed decision variable and the mass is pinned at 1.
DualStageLp build_dual_lp_impl(const Instance& inst, int stage, const Vec* pi_in, double gamma_in,
                               const DualApprox& approx) {
  const Stage& st = inst.stage(stage);
  const int J = st.num_realizations();
  const int m = st.row_count();
  const int nx_next = st.state_dim();
  const int nx_in = stage == 0 ? static_cast<int>(inst.x0.size()) : st.prev_state_dim();
  const int ny = st.control_dim();
  const bool terminal = stage + 1 == inst.horizon;
  const bool fused = stage == 0;

  if (!terminal && approx.by_stage()[static_cast<std::size_t>(stage) + 1].empty()) {
    throw Error("dual stage " + std::to_string(stage) +
                ": no cuts for the next stage (initialize the upper model first)");
  }

  DualStageLp out;
  LinearProgram& lp = out.lp;
  lp = LinearProgram(ObjSense::Maximize);

  // State-coupling variables.
  std::vector<int> zeta;
  if (!fused) {
    const Vec& xbar_prev = inst.stage(stage - 1).xbar;
    for (int i = 0; i < nx_in; ++i) {
      zeta.push_back(lp.add_variable(idx("zeta", i), 0.0, kInf, -xbar_prev[static_cast<std::size_t>(i)]));
    }
  } else {
    const Vec& L0 = st.lipschitz;
    for (int i = 0; i < nx_in; ++i) {
      out.pi0_vars.push_back(lp.add_variable(idx("pi0", i), -L0[static_cast<std::size_t>(i)],
                                             L0[static_cast<std::size_t>(i)],
                                             inst.x0[static_cast<std::size_t>(i)]));
    }
  }

  std::vector<std::vector<int>> lambda(static_cast<std::size_t>(J));
  std::vector<std::vector<int>> xi(static_cast<std::size_t>(J));
  std::vector<int> hypo(static_cast<std::size_t>(J), -1);
  std::vector<std::vector<int>> s_vars(static_cast<std::size_t>(J));
  out.next_pi_vars.resize(static_cast<std::size_t>(J));
  out.next_gamma_vars.resize(static_cast<std::size_t>(J));

  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
    for (int r = 0; r < m; ++r) {
      lambda[static_cast<std::size_t>(j)].push_back(
          lp.add_variable(idx2("lambda", j, r), -kInf, kInf, -real.d[static_cast<std::size_t>(r)]));
    }
    for (int i = 0; i < nx_next; ++i) {
      out.next_pi_vars[static_cast<std::size_t>(j)].push_back(
          lp.add_variable(idx2("pi", j, i), -kInf, kInf, 0.0));
    }
    out.next_gamma_vars[static_cast<std::size_t>(j)] =
        lp.add_variable(idx("gamma", j), 0.0, kInf, 0.0);
    for (int k = 0; k < ny; ++k) {
      xi[static_cast<std::size_t>(j)].push_back(
          lp.add_variable(idx2("xi", j, k), 0.0, kInf, -st.ybar[static_cast<std::size_t>(k)]));
    }
    if (terminal) {
      const Vec& xbar_term = st.xbar;
      for (int i = 0; i < nx_next; ++i) {
        s_vars[static_cast<std::size_t>(j)].push_back(lp.add_variable(
            idx2("s", j, i), 0.0, kInf, -xbar_term[static_cast<std::size_t>(i)]));
      }
    } else {
      hypo[static_cast<std::size_t>(j)] = lp.add_variable(idx("zn", j), -kInf, kInf, 1.0);
    }
  }

  // Coupling rows carrying the incoming price: one per component.
  // stage >= 1:  zeta_i + sum_j (B_j^T lambda_j)_i >= pi_in_i
  // stage == 0:  sum_j (B_j^T lambda_j)_i - pi0_i = 0
  for (int i = 0; i < nx_in; ++i) {
    std::vector<std::pair<int, double>> coeffs;
    if (!fused) {
      coeffs.push_back({zeta[static_cast<std::size_t>(i)], 1.0});
    } else {
      coeffs.push_back({out.pi0_vars[static_cast<std::size_t>(i)], -1.0});
    }
    for (int j = 0; j < J; ++j) {
      for (const Triplet& t : st.realizations[static_cast<std::size_t>(j)].B.entries) {
        if (t.col == i) {
          coeffs.push_back({lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
        }
      }
    }
    out.pi_rows.push_back(lp.add_row(idx("coupling", i),
                                     fused ? RowSense::Equal : RowSense::GreaterEqual,
                                     fused ? 0.0 : (*pi_in)[static_cast<std::size_t>(i)],
                                     std::move(coeffs)));
  }

  // Envelope block gamma in gamma_in * Q with a single mass row.
  {
    const RiskEnvelope env = st.envelope();
    EnvelopeEmission em =
        emit_envelope_constraints(lp, env, out.next_gamma_vars, gamma_in, "env");
    out.mass_row = em.mass_row;
  }

  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];

    // pi_j + A_j^T lambda_j = 0, componentwise.
    std::vector<std::vector<std::pair<int, double>>> price(static_cast<std::size_t>(nx_next));
    for (const Triplet& t : real.A.entries) {
      price[static_cast<std::size_t>(t.col)].push_back(
          {lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
    }
    for (int i = 0; i < nx_next; ++i) {
      auto coeffs = std::move(price[static_cast<std::size_t>(i)]);
      coeffs.push_back({out.next_pi_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], 1.0});
      lp.add_row(idx2("price", j, i), RowSense::Equal, 0.0, std::move(coeffs));
    }

    // gamma_j c_j + T_j^T lambda_j + xi_j >= 0, per control.
    std::vector<std::vector<std::pair<int, double>>> ctrl(static_cast<std::size_t>(ny));
    for (const Triplet& t : real.T.entries) {
      ctrl[static_cast<std::size_t>(t.col)].push_back(
          {lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
    }
    for (int k = 0; k < ny; ++k) {
      auto coeffs = std::move(ctrl[static_cast<std::size_t>(k)]);
      const double c = real.c[static_cast<std::size_t>(k)];
      if (c != 0.0) coeffs.push_back({out.next_gamma_vars[static_cast<std::size_t>(j)], c});
      coeffs.push_back({xi[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], 1.0});
      lp.add_row(idx2("ctrl", j, k), RowSense::GreaterEqual, 0.0, std::move(coeffs));
    }

    if (terminal) {
      // Exact terminal model: s_i >= pi_j_i, s_i >= 0, value -xbar^T s.
      for (int i = 0; i < nx_next; ++i) {
        lp.add_row(idx2("term", j, i), RowSense::GreaterEqual, 0.0,
                   {{s_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], 1.0},
                    {out.next_pi_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], -1.0}});
      }
    } else {
      // Lipschitz box |pi_j| <= gamma_j L_{stage+1}.
      const Vec& L = inst.stage(stage + 1).lipschitz;
      for (int i = 0; i < nx_next; ++i) {
        const int pv = out.next_pi_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        const int gv = out.next_gamma_vars[static_cast<std::size_t>(j)];
        const double Li = L[static_cast<std::size_t>(i)];
        lp.add_row(idx2("boxp", j, i), RowSense::LessEqual, 0.0, {{pv, 1.0}, {gv, -Li}});
        lp.add_row(idx2("boxm", j, i), RowSense::LessEqual, 0.0, {{pv, -1.0}, {gv, -Li}});
      }
      // Hypograph rows: zn_j <= x^T pi_j + z gamma_j for every stored cut.
      const auto& pool = approx.by_stage()[static_cast<std::size_t>(stage) + 1];
      for (std::size_t k = 0; k < pool.size(); ++k) {
        const DualCut& cut = pool[k];
        std::vector<std::pair<int, double>> coeffs{{hypo[static_cast<std::size_t>(j)], 1.0}};
        for (int i = 0; i < nx_next; ++i) {
          const double g = cut.x_slope[static_cast<std::size_t>(i)];
          if (g != 0.0) {
            coeffs.push_back(
                {out.next_pi_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], -g});
          }
        }
        if (cut.z_slope != 0.0) {
          coeffs.push_back({out.next_gamma_vars[static_cast<std::size_t>(j)], -cut.z_slope});
        }
        lp.add_row("cut[" + std::to_string(j) + "][" + std::to_string(k) + "]",
                   RowSense::LessEqual, 0.0, std::move(coeffs));
      }
    }
  }
  return out;
}

DualStageSolve solve_dual_lp(const Instance& inst, int stage, const DualState* state,
                             const DualApprox& approx, double lp_tol, int iteration) {
  const bool fused = stage == 0;
  DualStageLp built = fused ? build_dual_first_stage_lp(inst, approx)
                            : build_dual_stage_lp(inst, stage, *state, approx);
  const LpSolution sol = solve_lp(built.lp, lp_tol);
  if (sol.status != SolveStatus::Optimal) {
    throw SolverError("dual stage " + std::to_string(stage) + " LP " +
                      (sol.status == SolveStatus::Infeasible ? "infeasible" : "unbounded") +
                      " at iteration " + std::to_string(iteration));
  }

  const Stage& st = inst.stage(stage);
  const int J = st.num_realizations();
  const int nx_next = st.state_dim();
  const int nx_in = fused ? static_cast<int>(inst.x0.size()) : st.prev_state_dim();

  DualStageSolve out;
  out.value = sol.objective;
  out.cut.stage = stage;
  out.cut.iteration = iteration;
  out.cut.x_slope.resize(static_cast<std::size_t>(nx_in));
  for (int i = 0; i < nx_in; ++i) {
    out.cut.x_slope[static_cast<std::size_t>(i)] =
        sol.row_duals[static_cast<std::size_t>(built.pi_rows[static_cast<std::size_t>(i)])];
  }
  out.cut.z_slope = sol.row_duals[static_cast<std::size_t>(built.mass_row)];

  out.next_states.resize(static_cast<std::size_t>(J));
  out.gammas.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    DualState& ns = out.next_states[static_cast<std::size_t>(j)];
    ns.stage = stage + 1;
    ns.pi.resize(static_cast<std::size_t>(nx_next));
    for (int i = 0; i < nx_next; ++i) {
      ns.pi[static_cast<std::size_t>(i)] =
          sol.x[static_cast<std::size_t>(built.next_pi_vars[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])];
    }
    ns.gamma = sol.x[static_cast<std::size_t>(built.next_gamma_vars[static_cast<std::size_t>(j)])];
    out.gammas[static_cast<std::size_t>(j)] = ns.gamma;
  }

  // Sanity identity. Strong duality plus homogeneous non-state rows make
  // v = x_slope^T pi + z_slope * gamma exact up to solver tolerance; at the
  // fused stage the pi_0 box contributes its reduced-cost terms.
  double predicted = out.cut.z_slope * (fused ? 1.0 : state->gamma);
  if (fused) {
    out.pi0.resize(static_cast<std::size_t>(nx_in));
    for (int i = 0; i < nx_in; ++i) {
      const int v = built.pi0_vars[static_cast<std::size_t>(i)];
      out.pi0[static_cast<std::size_t>(i)] = sol.x[static_cast<std::size_t>(v)];
      predicted += sol.reduced_costs[static_cast<std::size_t>(v)] * sol.x[static_cast<std::size_t>(v)];
    }
  } else {
    predicted += dot(out.cut.x_slope, state->pi);
  }
  out.sanity_residual = std::fabs(out.value - predicted) / (1.0 + std::fabs(out.value));
  return out;
}

}  // namespace

DualStageLp build_dual_stage_lp(const Instance& inst, int stage, const DualState& state,
                                const DualApprox& approx) {
  if (stage < 1 || stage >= inst.horizon) {
    throw Error("build_dual_stage_lp: stage out of range (use the fused builder for stage 0)");
  }
  return build_dual_lp_impl(inst, stage, &state.pi, state.gamma, approx);
}

DualStageLp build_dual_first_stage_lp(const Instance& inst, const DualApprox& approx) {
  return build_dual_lp_impl(inst, 0, nullptr, 1.0, approx);
}

DualStageSolve solve_dual_stage(const Instance& inst, int stage, const DualState& state,
                                const DualApprox& approx, double lp_tol, int iteration) {
  return solve_dual_lp(inst, stage, &state, approx, lp_tol, iteration);
}

DualStageSolve solve_dual_first_stage(const Instance& inst, const DualApprox& approx,
                                      double lp_tol, int iteration) {
  return solve_dual_lp(inst, 0, nullptr, approx, lp_tol, iteration);
}

std::pair<double, Vec> solve_first_stage(const Instance& inst, const DualApprox& approx,
                                         double lp_tol) {
  DualStageSolve solve = solve_dual_first_stage(inst, approx, lp_tol, 0);
  return {solve.value, solve.pi0};
}

int sample_branch(const Vec& gamma, double epsilon, DeterministicRng& rng) {
  if (epsilon < 0.0) throw std::invalid_argument("sample_branch: negative epsilon");
  Vec weights(gamma.size());
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    weights[j] = std::max(gamma[j], 0.0) + epsilon;
  }
  return rng.sample_weights(weights);
}

DualState normalize_state(const DualState& state, double gamma_round_tol) {
  DualState out = state;
  if (state.gamma > gamma_round_tol) {
    for (double& v : out.pi) v /= state.gamma;
    out.gamma = 1.0;
  } else {
    out.gamma = 0.0;
  }
  return out;
}

DualApprox init_upper_approx(const Instance& inst, double lp_tol) {
  DualApprox approx(inst.horizon);
  for (int s = inst.horizon - 1; s >= 1; --s) {
    DualState state;
    state.stage = s;
    state.pi.assign(static_cast<std::size_t>(inst.stage(s).prev_state_dim()), 0.0);
    state.gamma = 1.0;
    DualStageSolve solve = solve_dual_stage(inst, s, state, approx, lp_tol, 0);
    approx.add(solve.cut);
  }
  return approx;
}

DualSddp::DualSddp(const Instance& inst, DualOptions options)
    : inst_(&inst), opts_(options), rng_(options.seed), approx_(init_upper_approx(inst, options.lp_tol)) {}

double DualSddp::upper_bound() const {
  return solve_dual_first_stage(*inst_, approx_, opts_.lp_tol, iteration_).value;
}

void DualSddp::record_solve(const DualStageSolve& solve) {
  ++stage_solves_;
  if (solve.sanity_residual > opts_.sanity_tol) {
    ++sanity_warnings_;
    if (opts_.log) {
      *opts_.log << "warn: dual stage " << solve.cut.stage << " sanity residual "
                 << solve.sanity_residual << " at iteration " << iteration_ << "\n";
    }
  }
}

double DualSddp::iterate() {
  const int T = inst_->horizon;
  ++iteration_;

  DualStageSolve first = solve_dual_first_stage(*inst_, approx_, opts_.lp_tol, iteration_);
  record_solve(first);
  approx_.add(first.cut);
  const double ub = first.value;

  std::vector<DualState> path;
  if (T > 1) {
    const double eps0 = opts_.epsilon >= 0.0
                            ? opts_.epsilon
                            : 1e-2 / inst_->stage(0).num_realizations();
    const int pick = sample_branch(first.gammas, eps0, rng_);
    DualState state =
        normalize_state(first.next_states[static_cast<std::size_t>(pick)], opts_.gamma_round_tol);
    for (int t = 1; t < T; ++t) {
      path.push_back(state);
      DualStageSolve solve = solve_dual_stage(*inst_, t, state, approx_, opts_.lp_tol, iteration_);
      record_solve(solve);
      approx_.add(solve.cut);
      const double eps = opts_.epsilon >= 0.0
                             ? opts_.epsilon
                             : 1e-2 / inst_->stage(t).num_realizations();
      const int j = sample_branch(solve.gammas, eps, rng_);
      state =
          normalize_state(solve.next_states[static_cast<std::size_t>(j)], opts_.gamma_round_tol);
    }
  }
  visited_.push_back(path);

  if (opts_.backward_pass) {
    dual_backward_pass(*inst_, path, approx_, opts_, iteration_);
  }

  if (opts_.log) {
    *opts_.log << "dual iteration " << iteration_ << ": ub=" << ub << "\n";
  }
  return ub;
}

void dual_backward_pass(const Instance& inst, const std::vector<DualState>& visited,
                        DualApprox& approx, const DualOptions& options, int iteration) {
  if (visited.empty()) return;
  for (auto it = visited.rbegin(); it != visited.rend(); ++it) {
    DualStageSolve solve = solve_dual_stage(inst, it->stage, *it, approx, options.lp_tol, iteration);
    approx.add(solve.cut);
  }
  DualStageSolve first = solve_dual_first_stage(inst, approx, options.lp_tol, iteration);
  approx.add(first.cut);
}

DualRunResult run_dual(const Instance& inst, int iters, DualOptions options) {
  DualSddp sddp(inst, options);
  DualRunResult out;
  for (int k = 0; k < iters; ++k) out.ub_series.push_back(sddp.iterate());
  out.ub_series.push_back(sddp.upper_bound());
  out.approx = sddp.approx();
  out.visited = sddp.visited();
  out.stage_solves = sddp.stage_solves();
  out.sanity_warnings = sddp.sanity_warnings();
  return out;
}

std::string dual_cuts_to_json(const DualApprox& approx) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const auto& pool : approx.by_stage()) {
    for (const DualCut& c : pool) {
      nlohmann::ordered_json jc;
      jc["stage"] = c.stage;
      jc["x"] = c.x_slope;
      jc["z"] = c.z_slope;
      jc["iteration"] = c.iteration;
      root.push_back(std::move(jc));
    }
  }
  return root.dump(2) + "\n";
}

DualApprox dual_cuts_from_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid cut JSON: ") + e.what());
  }
  int max_stage = -1;
  for (const auto& jc : root) max_stage = std::max(max_stage, jc.at("stage").get<int>());
  DualApprox approx(max_stage + 1);
  for (const auto& jc : root) {
    DualCut c;
    c.stage = jc.at("stage").get<int>();
    c.x_slope = jc.at("x").get<Vec>();
    c.z_slope = jc.at("z").get<double>();
    c.iteration = jc.value("iteration", 0);
    approx.add(std::move(c));
  }
  return approx;
}

}  // namespace dualsddp
