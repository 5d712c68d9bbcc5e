#include "dualsddp/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualsddp/dual.hpp"
#include "dualsddp/errors.hpp"
#include "dualsddp/simplex.hpp"

namespace dualsddp {

namespace {

std::string nidx(const std::string& base, int node) { return base + "@" + std::to_string(node); }
std::string nidx2(const std::string& base, int node, int i) {
  return base + "@" + std::to_string(node) + "[" + std::to_string(i) + "]";
}

}  // namespace

ExtensiveSolution solve_extensive_primal(const Instance& inst, long node_budget, double lp_tol) {
  const int T = inst.horizon;
  const std::vector<TreeNode> tree = enumerate_tree(inst, T, node_budget);
  const int N = static_cast<int>(tree.size());

  // Children listed per node, in realization order.
  std::vector<std::vector<int>> children(static_cast<std::size_t>(N));
  for (const TreeNode& n : tree) {
    if (n.parent >= 0) children[static_cast<std::size_t>(n.parent)].push_back(n.id);
  }

  LinearProgram lp(ObjSense::Minimize);

  // Node variables. The root carries only z; every other node carries its
  // stage decisions, the state copy, and (internal nodes) its own z.
  std::vector<int> z_var(static_cast<std::size_t>(N), -1);
  std::vector<int> theta_var(static_cast<std::size_t>(N), -1);
  std::vector<std::vector<int>> x_var(static_cast<std::size_t>(N));       // local dynamics copy
  std::vector<std::vector<int>> xtilde_var(static_cast<std::size_t>(N));  // boxed state
  std::vector<std::vector<int>> y_var(static_cast<std::size_t>(N));

  z_var[0] = lp.add_variable("z@0", -kInf, kInf, 1.0);
  for (const TreeNode& n : tree) {
    if (n.parent < 0) continue;
    const Stage& st = inst.stage(n.depth - 1);
    const int nx = st.state_dim();
    const int ny = st.control_dim();
    theta_var[static_cast<std::size_t>(n.id)] = lp.add_variable(nidx("theta", n.id), -kInf, kInf, 0.0);
    if (n.depth < T) {
      z_var[static_cast<std::size_t>(n.id)] = lp.add_variable(nidx("z", n.id), -kInf, kInf, 0.0);
    }
    for (int i = 0; i < nx; ++i) {
      x_var[static_cast<std::size_t>(n.id)].push_back(
          lp.add_variable(nidx2("x", n.id, i), -kInf, kInf, 0.0));
      xtilde_var[static_cast<std::size_t>(n.id)].push_back(lp.add_variable(
          nidx2("xt", n.id, i), 0.0, st.xbar[static_cast<std::size_t>(i)], 0.0));
    }
    for (int k = 0; k < ny; ++k) {
      y_var[static_cast<std::size_t>(n.id)].push_back(lp.add_variable(
          nidx2("y", n.id, k), 0.0, st.ybar[static_cast<std::size_t>(k)], 0.0));
    }
  }

  std::vector<std::vector<int>> dyn_rows(static_cast<std::size_t>(N));
  std::vector<int> epi_rows(static_cast<std::size_t>(N), -1);
  std::vector<std::vector<int>> copy_rows(static_cast<std::size_t>(N));

  for (const TreeNode& n : tree) {
    if (n.depth >= T) continue;  // leaves have no children
    const Stage& st = inst.stage(n.depth);
    const int J = st.num_realizations();
    const auto& kids = children[static_cast<std::size_t>(n.id)];

    // Risk head tying z_n to the children's theta.
    const RiskSpec& risk = st.risk;
    if (risk.type == RiskSpec::Type::Polyhedral) {
      for (std::size_t k = 0; k < risk.vertices.size(); ++k) {
        std::vector<std::pair<int, double>> coeffs{{z_var[static_cast<std::size_t>(n.id)], 1.0}};
        for (int j = 0; j < J; ++j) {
          const double q = risk.vertices[k][static_cast<std::size_t>(j)];
          if (q != 0.0) {
            coeffs.push_back({theta_var[static_cast<std::size_t>(kids[static_cast<std::size_t>(j)])], -q});
          }
        }
        lp.add_row(nidx("risk", n.id) + "/" + std::to_string(k), RowSense::GreaterEqual, 0.0,
                   std::move(coeffs));
      }
    } else if (risk.beta == 1.0) {
      std::vector<std::pair<int, double>> coeffs{{z_var[static_cast<std::size_t>(n.id)], 1.0}};
      for (int j = 0; j < J; ++j) {
        const double p = st.realizations[static_cast<std::size_t>(j)].probability;
        if (p != 0.0) {
          coeffs.push_back({theta_var[static_cast<std::size_t>(kids[static_cast<std::size_t>(j)])], -p});
        }
      }
      lp.add_row(nidx("risk", n.id), RowSense::GreaterEqual, 0.0, std::move(coeffs));
    } else {
      // Rockafellar-Uryasev head for the AV@R part.
      const int q_var = lp.add_variable(nidx("q", n.id), -kInf, kInf, 0.0);
      std::vector<int> u_vars;
      for (int j = 0; j < J; ++j) {
        u_vars.push_back(lp.add_variable(nidx("u", n.id) + "/" + std::to_string(j), 0.0, kInf, 0.0));
      }
      std::vector<std::pair<int, double>> head{{z_var[static_cast<std::size_t>(n.id)], 1.0},
                                               {q_var, -(1.0 - risk.beta)}};
      for (int j = 0; j < J; ++j) {
        const double p = st.realizations[static_cast<std::size_t>(j)].probability;
        if (p != 0.0) {
          head.push_back({theta_var[static_cast<std::size_t>(kids[static_cast<std::size_t>(j)])],
                          -risk.beta * p});
          head.push_back({u_vars[static_cast<std::size_t>(j)], -(1.0 - risk.beta) / risk.alpha * p});
        }
      }
      lp.add_row(nidx("risk", n.id), RowSense::GreaterEqual, 0.0, std::move(head));
      for (int j = 0; j < J; ++j) {
        lp.add_row(nidx("ru", n.id) + "/" + std::to_string(j), RowSense::GreaterEqual, 0.0,
                   {{q_var, 1.0},
                    {u_vars[static_cast<std::size_t>(j)], 1.0},
                    {theta_var[static_cast<std::size_t>(kids[static_cast<std::size_t>(j)])], -1.0}});
      }
    }

    // Child rows: epigraph, dynamics, state copy.
    for (int j = 0; j < J; ++j) {
      const int mid = kids[static_cast<std::size_t>(j)];
      const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
      const int nx = st.state_dim();
      const int ny = st.control_dim();

      std::vector<std::pair<int, double>> epi{{theta_var[static_cast<std::size_t>(mid)], 1.0}};
      for (int k = 0; k < ny; ++k) {
        const double c = real.c[static_cast<std::size_t>(k)];
        if (c != 0.0) epi.push_back({y_var[static_cast<std::size_t>(mid)][static_cast<std::size_t>(k)], -c});
      }
      if (z_var[static_cast<std::size_t>(mid)] >= 0) {
        epi.push_back({z_var[static_cast<std::size_t>(mid)], -1.0});
      }
      epi_rows[static_cast<std::size_t>(mid)] =
          lp.add_row(nidx("epi", mid), RowSense::GreaterEqual, 0.0, std::move(epi));

      // A x_m + B xtilde_n + T y_m = d; the root state folds into the rhs.
      const int m = st.row_count();
      Vec rhs = real.d;
      std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(m));
      for (const Triplet& t : real.A.entries) {
        rows[static_cast<std::size_t>(t.row)].push_back(
            {x_var[static_cast<std::size_t>(mid)][static_cast<std::size_t>(t.col)], t.value});
      }
      for (const Triplet& t : real.T.entries) {
        rows[static_cast<std::size_t>(t.row)].push_back(
            {y_var[static_cast<std::size_t>(mid)][static_cast<std::size_t>(t.col)], t.value});
      }
      if (n.parent < 0 && n.id == 0) {
        Vec shift(static_cast<std::size_t>(m), 0.0);
        real.B.multiply_add(inst.x0, shift);
        for (int r = 0; r < m; ++r) rhs[static_cast<std::size_t>(r)] -= shift[static_cast<std::size_t>(r)];
      } else {
        for (const Triplet& t : real.B.entries) {
          rows[static_cast<std::size_t>(t.row)].push_back(
              {xtilde_var[static_cast<std::size_t>(n.id)][static_cast<std::size_t>(t.col)], t.value});
        }
      }
      for (int r = 0; r < m; ++r) {
        dyn_rows[static_cast<std::size_t>(mid)].push_back(
            lp.add_row(nidx("dyn", mid) + "/" + std::to_string(r), RowSense::Equal,
                       rhs[static_cast<std::size_t>(r)], std::move(rows[static_cast<std::size_t>(r)])));
      }
      for (int i = 0; i < nx; ++i) {
        copy_rows[static_cast<std::size_t>(mid)].push_back(
            lp.add_row(nidx("copy", mid) + "/" + std::to_string(i), RowSense::Equal, 0.0,
                       {{x_var[static_cast<std::size_t>(mid)][static_cast<std::size_t>(i)], 1.0},
                        {xtilde_var[static_cast<std::size_t>(mid)][static_cast<std::size_t>(i)], -1.0}}));
      }
    }
  }

  const LpSolution sol = solve_lp(lp, lp_tol);
  if (sol.status != SolveStatus::Optimal) {
    throw SolverError("extensive LP " +
                      std::string(sol.status == SolveStatus::Infeasible ? "infeasible" : "unbounded"));
  }

  ExtensiveSolution out;
  out.value = sol.objective;
  out.tree = tree;
  out.state.resize(static_cast<std::size_t>(N));
  out.controls.resize(static_cast<std::size_t>(N));
  out.node_value.assign(static_cast<std::size_t>(N), 0.0);
  out.theta.assign(static_cast<std::size_t>(N), 0.0);
  out.lambda.resize(static_cast<std::size_t>(N));
  out.gamma.assign(static_cast<std::size_t>(N), 0.0);
  out.pi.resize(static_cast<std::size_t>(N));
  out.state[0] = inst.x0;
  out.node_value[0] = sol.objective;
  for (const TreeNode& n : tree) {
    if (n.parent < 0) continue;
    const std::size_t id = static_cast<std::size_t>(n.id);
    for (int v : xtilde_var[id]) out.state[id].push_back(sol.x[static_cast<std::size_t>(v)]);
    for (int v : y_var[id]) out.controls[id].push_back(sol.x[static_cast<std::size_t>(v)]);
    if (z_var[id] >= 0) out.node_value[id] = sol.x[static_cast<std::size_t>(z_var[id])];
    out.theta[id] = sol.x[static_cast<std::size_t>(theta_var[id])];
    for (int r : dyn_rows[id]) out.lambda[id].push_back(sol.row_duals[static_cast<std::size_t>(r)]);
    out.gamma[id] = sol.row_duals[static_cast<std::size_t>(epi_rows[id])];
    for (int r : copy_rows[id]) out.pi[id].push_back(sol.row_duals[static_cast<std::size_t>(r)]);
  }
  return out;
}

double exact_dual_value(const Instance& inst, int stage, const Vec& pi, double gamma,
                        long subtree_budget, bool with_lipschitz_rows, double lp_tol) {
  const int T = inst.horizon;
  if (stage < 0 || stage > T) throw Error("exact_dual_value: stage out of range");
  if (gamma < 0.0) throw Error("exact_dual_value: gamma must be nonnegative");
  if (stage == T) {
    return terminal_dual_value(pi, gamma, inst.stage(T - 1).xbar);
  }

  // Subtree node count: one root plus the full branching of stages
  // stage..T-1.
  long count = 1;
  long product = 1;
  for (int s = stage; s < T; ++s) {
    product *= inst.stage(s).num_realizations();
    count += product;
    if (count > subtree_budget) {
      throw BudgetError("exact_dual_value: subtree of " + std::to_string(count) +
                        "+ nodes exceeds budget " + std::to_string(subtree_budget));
    }
  }

  LinearProgram lp(ObjSense::Maximize);

  // Recursive expansion. Each internal node owns the envelope block over its
  // children and (unless it is the root) receives its incoming (pi, gamma)
  // as variables from the parent.
  struct Frame {
    int depth;          // stage index of the branching at this node
    std::vector<int> pi_vars;   // incoming price (empty at root: handled via rows)
    int gamma_var;      // incoming mass (-1 at root)
    int id;
  };

  int next_id = 0;
  // Builds the subproblem of node `f` and returns nothing; children are
  // expanded depth-first.
  std::vector<Frame> stack;
  Frame root;
  root.depth = stage;
  root.gamma_var = -1;
  root.id = next_id++;
  stack.push_back(root);

  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const int s = f.depth;
    const Stage& st = inst.stage(s);
    const int J = st.num_realizations();
    const int m = st.row_count();
    const int nx_next = st.state_dim();
    const int nx_in = s == 0 ? static_cast<int>(inst.x0.size()) : st.prev_state_dim();
    const int ny = st.control_dim();
    const bool root_node = f.gamma_var < 0;
    const std::string tag = "n" + std::to_string(f.id);

    // Child variables.
    std::vector<std::vector<int>> lambda(static_cast<std::size_t>(J));
    std::vector<std::vector<int>> child_pi(static_cast<std::size_t>(J));
    std::vector<int> child_gamma(static_cast<std::size_t>(J));
    std::vector<std::vector<int>> xi(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
      for (int r = 0; r < m; ++r) {
        lambda[static_cast<std::size_t>(j)].push_back(lp.add_variable(
            nidx2(tag + ".lambda", j, r), -kInf, kInf, -real.d[static_cast<std::size_t>(r)]));
      }
      for (int i = 0; i < nx_next; ++i) {
        child_pi[static_cast<std::size_t>(j)].push_back(
            lp.add_variable(nidx2(tag + ".pi", j, i), -kInf, kInf, 0.0));
      }
      child_gamma[static_cast<std::size_t>(j)] =
          lp.add_variable(nidx(tag + ".gamma", j), 0.0, kInf, 0.0);
      for (int k = 0; k < ny; ++k) {
        xi[static_cast<std::size_t>(j)].push_back(lp.add_variable(
            nidx2(tag + ".xi", j, k), 0.0, kInf, -st.ybar[static_cast<std::size_t>(k)]));
      }
    }

    // Price coupling at this node.
    if (root_node && s == 0) {
      // Fused equality: sum_j B_j^T lambda_j = pi (the given state).
      for (int i = 0; i < nx_in; ++i) {
        std::vector<std::pair<int, double>> coeffs;
        for (int j = 0; j < J; ++j) {
          for (const Triplet& t : st.realizations[static_cast<std::size_t>(j)].B.entries) {
            if (t.col == i) {
              coeffs.push_back({lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
            }
          }
        }
        lp.add_row(nidx2(tag + ".coupling", 0, i), RowSense::Equal, pi[static_cast<std::size_t>(i)],
                   std::move(coeffs));
      }
    } else {
      // zeta relaxation with the previous stage's state box.
      const Vec& xbar_prev = inst.stage(s - 1).xbar;
      std::vector<int> zeta;
      for (int i = 0; i < nx_in; ++i) {
        zeta.push_back(lp.add_variable(nidx2(tag + ".zeta", 0, i), 0.0, kInf,
                                       -xbar_prev[static_cast<std::size_t>(i)]));
      }
      for (int i = 0; i < nx_in; ++i) {
        std::vector<std::pair<int, double>> coeffs{{zeta[static_cast<std::size_t>(i)], 1.0}};
        for (int j = 0; j < J; ++j) {
          for (const Triplet& t : st.realizations[static_cast<std::size_t>(j)].B.entries) {
            if (t.col == i) {
              coeffs.push_back({lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
            }
          }
        }
        if (root_node) {
          lp.add_row(nidx2(tag + ".coupling", 0, i), RowSense::GreaterEqual,
                     pi[static_cast<std::size_t>(i)], std::move(coeffs));
        } else {
          coeffs.push_back({f.pi_vars[static_cast<std::size_t>(i)], -1.0});
          lp.add_row(nidx2(tag + ".coupling", 0, i), RowSense::GreaterEqual, 0.0, std::move(coeffs));
        }
      }
    }

    // Envelope block over the children.
    {
      const RiskEnvelope env = st.envelope();
      if (root_node) {
        emit_envelope_constraints(lp, env, child_gamma, gamma, tag + ".env");
      } else {
        emit_envelope_constraints(lp, env, child_gamma, f.gamma_var, tag + ".env");
      }
    }

    for (int j = 0; j < J; ++j) {
      const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
      // pi_j + A_j^T lambda_j = 0.
      std::vector<std::vector<std::pair<int, double>>> price(static_cast<std::size_t>(nx_next));
      for (const Triplet& t : real.A.entries) {
        price[static_cast<std::size_t>(t.col)].push_back(
            {lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
      }
      for (int i = 0; i < nx_next; ++i) {
        auto coeffs = std::move(price[static_cast<std::size_t>(i)]);
        coeffs.push_back({child_pi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], 1.0});
        lp.add_row(nidx2(tag + ".price", j, i), RowSense::Equal, 0.0, std::move(coeffs));
      }
      // gamma_j c + T^T lambda + xi >= 0.
      std::vector<std::vector<std::pair<int, double>>> ctrl(static_cast<std::size_t>(ny));
      for (const Triplet& t : real.T.entries) {
        ctrl[static_cast<std::size_t>(t.col)].push_back(
            {lambda[static_cast<std::size_t>(j)][static_cast<std::size_t>(t.row)], t.value});
      }
      for (int k = 0; k < ny; ++k) {
        auto coeffs = std::move(ctrl[static_cast<std::size_t>(k)]);
        const double c = real.c[static_cast<std::size_t>(k)];
        if (c != 0.0) coeffs.push_back({child_gamma[static_cast<std::size_t>(j)], c});
        coeffs.push_back({xi[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], 1.0});
        lp.add_row(nidx2(tag + ".ctrl", j, k), RowSense::GreaterEqual, 0.0, std::move(coeffs));
      }

      if (s + 1 == T) {
        // Terminal: s_i >= pi_j_i, s_i >= 0, objective -xbar^T s.
        for (int i = 0; i < nx_next; ++i) {
          const int sv = lp.add_variable(nidx2(tag + ".s", j, i), 0.0, kInf,
                                         -st.xbar[static_cast<std::size_t>(i)]);
          lp.add_row(nidx2(tag + ".term", j, i), RowSense::GreaterEqual, 0.0,
                     {{sv, 1.0},
                      {child_pi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)], -1.0}});
        }
      } else {
        if (with_lipschitz_rows) {
          const Vec& L = inst.stage(s + 1).lipschitz;
          for (int i = 0; i < nx_next; ++i) {
            const int pv = child_pi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            const int gv = child_gamma[static_cast<std::size_t>(j)];
            const double Li = L[static_cast<std::size_t>(i)];
            lp.add_row(nidx2(tag + ".boxp", j, i), RowSense::LessEqual, 0.0, {{pv, 1.0}, {gv, -Li}});
            lp.add_row(nidx2(tag + ".boxm", j, i), RowSense::LessEqual, 0.0, {{pv, -1.0}, {gv, -Li}});
          }
        }
        Frame child;
        child.depth = s + 1;
        child.pi_vars = child_pi[static_cast<std::size_t>(j)];
        child.gamma_var = child_gamma[static_cast<std::size_t>(j)];
        child.id = next_id++;
        stack.push_back(child);
      }
    }
  }

  const LpSolution sol = solve_lp(lp, lp_tol);
  if (sol.status == SolveStatus::Infeasible) {
    // Only possible at the root equality form: (pi, gamma) outside the
    // domain of D_0, where the supremum over an empty set is -infinity.
    return -kInf;
  }
  if (sol.status != SolveStatus::Optimal) {
    throw SolverError("exact_dual_value: LP unbounded");
  }
  return sol.objective;
}

CoperspectiveReport coperspective_check(const Instance& inst, int stage, double grid_h,
                                        int num_samples, std::uint64_t seed, long node_budget,
                                        double lp_tol) {
  const int T = inst.horizon;
  if (stage < 1 || stage > T) throw Error("coperspective_check: stage must lie in [1, horizon]");
  const Vec& xbar = inst.stage(stage - 1).xbar;
  const int n = static_cast<int>(xbar.size());
  if (n > 2) throw Error("coperspective_check: state dimension must be 1 or 2");
  // Sampling box for pi; at the terminal stage the cost-to-go is flat and
  // the grid identity is exact, so any box works and the tolerance is zero.
  const Vec& L = stage < T ? inst.stage(stage).lipschitz : inst.stage(T - 1).lipschitz;
  const bool terminal_check = stage == T;

  // Tabulate the primal cost-to-go of stages stage..T-1 on the state grid by
  // extensive solves of the truncated instance.
  Instance tail;
  tail.name = inst.name + "-tail";
  tail.horizon = T - stage;
  tail.stages.assign(inst.stages.begin() + stage, inst.stages.end());

  std::vector<int> steps(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    steps[static_cast<std::size_t>(i)] =
        static_cast<int>(std::floor(xbar[static_cast<std::size_t>(i)] / grid_h + 1e-9)) + 1;
  }
  std::vector<Vec> grid_x;
  std::vector<int> counter(static_cast<std::size_t>(n), 0);
  for (;;) {
    Vec x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = std::min(counter[static_cast<std::size_t>(i)] * grid_h,
                                                xbar[static_cast<std::size_t>(i)]);
    }
    grid_x.push_back(x);
    int i = 0;
    for (; i < n; ++i) {
      if (++counter[static_cast<std::size_t>(i)] < steps[static_cast<std::size_t>(i)]) break;
      counter[static_cast<std::size_t>(i)] = 0;
    }
    if (i == n) break;
  }

  Vec grid_v;
  grid_v.reserve(grid_x.size());
  for (const Vec& x : grid_x) {
    if (tail.horizon == 0) {
      grid_v.push_back(0.0);  // terminal stage: the cost-to-go vanishes
      continue;
    }
    tail.x0 = x;
    grid_v.push_back(solve_extensive_primal(tail, node_budget, lp_tol).value);
  }

  // Grid coperspective over the domain-restricted conjugate.
  auto conj_grid = [&](const Vec& psi, double g) {
    double best = -kInf;
    for (std::size_t k = 0; k < grid_x.size(); ++k) {
      best = std::max(best, dot(psi, grid_x[k]) - g * grid_v[k]);
    }
    return best;
  };

  DeterministicRng rng(seed);
  CoperspectiveReport report;
  report.samples = num_samples;
  double Lmax = 0.0;
  for (double v : L) Lmax = std::max(Lmax, v);
  report.tolerance = terminal_check ? 0.0 : Lmax * grid_h;

  for (int smp = 0; smp < num_samples; ++smp) {
    Vec pi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      pi[static_cast<std::size_t>(i)] =
          rng.uniform(-L[static_cast<std::size_t>(i)], L[static_cast<std::size_t>(i)]);
    }
    const double g = smp % 5 == 0 ? 0.0 : rng.uniform01();  // include gamma = 0 samples

    const double lhs = exact_dual_value(inst, stage, pi, g, node_budget, false, lp_tol);

    // Outer inf over the zeta grid (zeta >= 0, psi = pi - zeta).
    double rhs = kInf;
    std::vector<int> zsteps(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double zmax = std::max(pi[static_cast<std::size_t>(i)], 0.0) + grid_h;
      zsteps[static_cast<std::size_t>(i)] = static_cast<int>(std::ceil(zmax / grid_h)) + 1;
    }
    std::vector<int> zc(static_cast<std::size_t>(n), 0);
    for (;;) {
      Vec zeta(static_cast<std::size_t>(n));
      Vec psi(static_cast<std::size_t>(n));
      double cost = 0.0;
      for (int i = 0; i < n; ++i) {
        zeta[static_cast<std::size_t>(i)] = zc[static_cast<std::size_t>(i)] * grid_h;
        psi[static_cast<std::size_t>(i)] =
            pi[static_cast<std::size_t>(i)] - zeta[static_cast<std::size_t>(i)];
        cost += xbar[static_cast<std::size_t>(i)] * zeta[static_cast<std::size_t>(i)];
      }
      rhs = std::min(rhs, cost + conj_grid(psi, g));
      int i = 0;
      for (; i < n; ++i) {
        if (++zc[static_cast<std::size_t>(i)] < zsteps[static_cast<std::size_t>(i)]) break;
        zc[static_cast<std::size_t>(i)] = 0;
      }
      if (i == n) break;
    }

    report.max_discrepancy = std::max(report.max_discrepancy, std::fabs(lhs - (-rhs)));
  }
  report.pass = report.max_discrepancy <= report.tolerance + 1e-9;
  return report;
}

namespace {

// One-step evaluation for the backward bound: the stage problem at incoming
// state x with the next value function replaced by the Lipschitz inner
// extension over (points, values).
double philpott_stage_value(const Instance& inst, int stage, const Vec& x,
                            const std::vector<Vec>& next_points, const Vec& next_values,
                            double lp_tol) {
  const Stage& st = inst.stage(stage);
  const int J = st.num_realizations();
  const int nx = st.state_dim();
  const int ny = st.control_dim();
  const int m = st.row_count();
  const bool terminal = stage + 1 == inst.horizon;
  const Vec* L = terminal ? nullptr : &inst.stage(stage + 1).lipschitz;

  Vec branch(static_cast<std::size_t>(J), 0.0);
  for (int j = 0; j < J; ++j) {
    const StageRealization& real = st.realizations[static_cast<std::size_t>(j)];
    LinearProgram lp(ObjSense::Minimize);
    std::vector<int> xv, yv;
    for (int i = 0; i < nx; ++i) {
      xv.push_back(lp.add_variable("x" + std::to_string(i), 0.0,
                                   st.xbar[static_cast<std::size_t>(i)], 0.0));
    }
    for (int k = 0; k < ny; ++k) {
      yv.push_back(lp.add_variable("y" + std::to_string(k), 0.0,
                                   st.ybar[static_cast<std::size_t>(k)],
                                   real.c[static_cast<std::size_t>(k)]));
    }
    if (!terminal) {
      std::vector<int> mu;
      for (std::size_t t = 0; t < next_points.size(); ++t) {
        mu.push_back(lp.add_variable("mu" + std::to_string(t), 0.0, kInf,
                                     next_values[t]));
      }
      std::vector<int> err;
      for (int i = 0; i < nx; ++i) {
        err.push_back(lp.add_variable("e" + std::to_string(i), 0.0, kInf,
                                      (*L)[static_cast<std::size_t>(i)]));
      }
      std::vector<std::pair<int, double>> hull;
      for (int v : mu) hull.push_back({v, 1.0});
      lp.add_row("hull", RowSense::Equal, 1.0, std::move(hull));
      for (int i = 0; i < nx; ++i) {
        std::vector<std::pair<int, double>> up{{err[static_cast<std::size_t>(i)], 1.0},
                                               {xv[static_cast<std::size_t>(i)], -1.0}};
        std::vector<std::pair<int, double>> dn{{err[static_cast<std::size_t>(i)], 1.0},
                                               {xv[static_cast<std::size_t>(i)], 1.0}};
        for (std::size_t t = 0; t < next_points.size(); ++t) {
          const double c = next_points[t][static_cast<std::size_t>(i)];
          if (c != 0.0) {
            up.push_back({mu[t], c});
            dn.push_back({mu[t], -c});
          }
        }
        lp.add_row("absu" + std::to_string(i), RowSense::GreaterEqual, 0.0, std::move(up));
        lp.add_row("absd" + std::to_string(i), RowSense::GreaterEqual, 0.0, std::move(dn));
      }
    }
    // Dynamics.
    Vec rhs = real.d;
    {
      Vec shift(static_cast<std::size_t>(m), 0.0);
      real.B.multiply_add(x, shift);
      for (int r = 0; r < m; ++r) rhs[static_cast<std::size_t>(r)] -= shift[static_cast<std::size_t>(r)];
    }
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(m));
    for (const Triplet& t : real.A.entries) {
      rows[static_cast<std::size_t>(t.row)].push_back({xv[static_cast<std::size_t>(t.col)], t.value});
    }
    for (const Triplet& t : real.T.entries) {
      rows[static_cast<std::size_t>(t.row)].push_back({yv[static_cast<std::size_t>(t.col)], t.value});
    }
    for (int r = 0; r < m; ++r) {
      lp.add_row("dyn" + std::to_string(r), RowSense::Equal, rhs[static_cast<std::size_t>(r)],
                 std::move(rows[static_cast<std::size_t>(r)]));
    }
    const LpSolution sol = solve_lp(lp, lp_tol);
    if (sol.status != SolveStatus::Optimal) {
      throw SolverError("philpott stage LP not optimal");
    }
    branch[static_cast<std::size_t>(j)] = sol.objective;
  }

  // Risk of the per-realization values, computed exactly.
  const RiskSpec& risk = st.risk;
  if (risk.type == RiskSpec::Type::Polyhedral) {
    double best = -kInf;
    for (const Vec& q : risk.vertices) best = std::max(best, dot(q, branch));
    return best;
  }
  Vec p(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    p[static_cast<std::size_t>(j)] = st.realizations[static_cast<std::size_t>(j)].probability;
  }
  return rho_mean_avar(branch, p, risk.alpha, risk.beta);
}

}  // namespace

PhilpottResult philpott_upper_bound(const Instance& inst, const TrialPointSet& trials,
                                    double lp_tol) {
  const int T = inst.horizon;
  if (static_cast<int>(trials.by_stage.size()) < T) {
    throw Error("philpott_upper_bound: trial set must cover stages 0..T-1");
  }
  for (int s = 1; s < T; ++s) {
    if (trials.by_stage[static_cast<std::size_t>(s)].empty()) {
      throw Error("philpott_upper_bound: empty trial set at stage " + std::to_string(s));
    }
  }

  PhilpottResult out;
  out.trial_values.assign(static_cast<std::size_t>(T), Vec{});
  std::vector<Vec> next_points;
  Vec next_values;
  for (int s = T - 1; s >= 1; --s) {
    const auto& pts = trials.by_stage[static_cast<std::size_t>(s)];
    Vec vals;
    vals.reserve(pts.size());
    for (const Vec& x : pts) {
      vals.push_back(philpott_stage_value(inst, s, x, next_points, next_values, lp_tol));
    }
    out.trial_values[static_cast<std::size_t>(s)] = vals;
    next_points = pts;
    next_values = std::move(vals);
  }
  out.root_upper_bound =
      philpott_stage_value(inst, 0, inst.x0, next_points, next_values, lp_tol);
  out.trial_values[0] = {out.root_upper_bound};
  return out;
}

}  // namespace dualsddp
