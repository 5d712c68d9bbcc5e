#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dualsddp/hydro.hpp"
#include "dualsddp/lp.hpp"
#include "dualsddp/model.hpp"
#include "dualsddp/rng.hpp"

namespace dualsddp::testing {

// Canonical two-stage example: storage bought at cost 2 in stage one can
// defer an uncertain purchase at cost 1 in stage two (demand 1 or 3,
// equiprobable). The risk-neutral value is 2.0, AV@R_{1/2} gives 3.0 and the
// half-half mix gives 2.5.
inline Instance tiny_defer(double alpha, double beta) {
  Instance inst;
  inst.name = "tiny-defer";
  inst.description = "two-stage storage-vs-spot toy";
  inst.horizon = 2;
  inst.x0 = {0.0};

  Stage s0;
  s0.xbar = {10.0};
  s0.ybar = {10.0};
  s0.lipschitz = {4.0};
  s0.risk = {RiskSpec::Type::MeanAvar, alpha, beta, {}};
  StageRealization r0;
  r0.probability = 1.0;
  r0.A = SparseMatrix(1, 1);
  r0.A.add(0, 0, 1.0);
  r0.B = SparseMatrix(1, 1);
  r0.T = SparseMatrix(1, 1);
  r0.T.add(0, 0, -1.0);
  r0.d = {0.0};
  r0.c = {2.0};
  s0.realizations.push_back(r0);
  inst.stages.push_back(s0);

  Stage s1;
  s1.xbar = {10.0};
  s1.ybar = {10.0};
  s1.lipschitz = {2.0};
  s1.risk = {RiskSpec::Type::MeanAvar, alpha, beta, {}};
  for (double demand : {1.0, 3.0}) {
    StageRealization r;
    r.probability = 0.5;
    r.A = SparseMatrix(1, 1);
    r.A.add(0, 0, 1.0);
    r.B = SparseMatrix(1, 1);
    r.B.add(0, 0, -1.0);
    r.T = SparseMatrix(1, 1);
    r.T.add(0, 0, -1.0);
    r.d = {-demand};
    r.c = {1.0};
    s1.realizations.push_back(r);
  }
  inst.stages.push_back(s1);
  return inst;
}

// Two-reservoir desk-scale hydrothermal system, T=4, three inflow scenarios
// per stage.
inline HydroConfig desk_hydro_2_config() {
  HydroConfig cfg;
  cfg.name = "desk-hydro-2";
  cfg.horizon = 4;
  cfg.subsystems = 2;
  cfg.reservoirs = {{10.0, 6.0, 5.0}, {10.0, 6.0, 5.0}};
  cfg.thermal = {{0, 5.0, 5.0}, {0, 5.0, 10.0}, {1, 5.0, 25.0}};
  cfg.interconnections = {{0, 1, 2.0, 0.5}};
  cfg.demand = {{8.0, 6.0}};
  cfg.inflows = {{{1.0, 0.5}, {3.0, 2.5}, {6.0, 5.0}}};
  cfg.curtailment_cost = {12.5, 25.0, 50.0, 100.0};
  cfg.spill_penalty = 0.1;
  cfg.alpha = 0.3;
  cfg.beta = 0.5;
  return cfg;
}

inline Instance desk_hydro_2() { return build_hydro_instance(desk_hydro_2_config()); }

// ---------------------------------------------------------------------------
// Brute-force LP oracle: vertex enumeration over all choices of active
// constraints (rows at equality plus variable bounds). Only for tiny LPs
// with finite boxes; the optimum of a bounded feasible LP sits at a vertex.

struct BruteForceResult {
  bool feasible = false;
  double value = 0.0;
};

namespace detail {

inline bool solve_square(std::vector<std::vector<double>> a, Vec b, Vec& x) {
  const int n = static_cast<int>(b.size());
  for (int k = 0; k < n; ++k) {
    int piv = -1;
    double best = 1e-10;
    for (int i = k; i < n; ++i) {
      if (std::fabs(a[i][k]) > best) {
        best = std::fabs(a[i][k]);
        piv = i;
      }
    }
    if (piv < 0) return false;
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (int i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return true;
}

}  // namespace detail

inline BruteForceResult brute_force_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  const int m = lp.num_rows();

  // Candidate active constraints: every row, every finite bound.
  struct Hyperplane {
    Vec coeffs;
    double rhs;
  };
  std::vector<Hyperplane> planes;
  for (int i = 0; i < m; ++i) {
    Hyperplane h;
    h.coeffs.assign(n, 0.0);
    for (const auto& [j, v] : lp.row(i).coeffs) h.coeffs[static_cast<std::size_t>(j)] += v;
    h.rhs = lp.row(i).rhs;
    planes.push_back(std::move(h));
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lp.var(j).lower)) {
      Hyperplane h;
      h.coeffs.assign(n, 0.0);
      h.coeffs[static_cast<std::size_t>(j)] = 1.0;
      h.rhs = lp.var(j).lower;
      planes.push_back(std::move(h));
    }
    if (std::isfinite(lp.var(j).upper)) {
      Hyperplane h;
      h.coeffs.assign(n, 0.0);
      h.coeffs[static_cast<std::size_t>(j)] = 1.0;
      h.rhs = lp.var(j).upper;
      planes.push_back(std::move(h));
    }
  }

  const int total = static_cast<int>(planes.size());
  const double feas_tol = 1e-7;
  BruteForceResult best;
  const double sg = lp.sense() == ObjSense::Minimize ? 1.0 : -1.0;

  std::vector<int> combo(static_cast<std::size_t>(n));
  auto feasible_point = [&](const Vec& x) {
    for (int j = 0; j < n; ++j) {
      if (x[static_cast<std::size_t>(j)] < lp.var(j).lower - feas_tol) return false;
      if (x[static_cast<std::size_t>(j)] > lp.var(j).upper + feas_tol) return false;
    }
    for (int i = 0; i < m; ++i) {
      double act = 0.0;
      for (const auto& [j, v] : lp.row(i).coeffs) act += v * x[static_cast<std::size_t>(j)];
      switch (lp.row(i).sense) {
        case RowSense::Equal:
          if (std::fabs(act - lp.row(i).rhs) > feas_tol) return false;
          break;
        case RowSense::LessEqual:
          if (act > lp.row(i).rhs + feas_tol) return false;
          break;
        case RowSense::GreaterEqual:
          if (act < lp.row(i).rhs - feas_tol) return false;
          break;
      }
    }
    return true;
  };

  // Enumerate n-subsets of candidate hyperplanes.
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  auto advance = [&]() {
    int i = n - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == total - n + i) --i;
    if (i < 0) return false;
    ++idx[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) idx[static_cast<std::size_t>(k)] = idx[static_cast<std::size_t>(k - 1)] + 1;
    return true;
  };
  if (total < n) return best;
  do {
    std::vector<std::vector<double>> a;
    Vec b;
    for (int k = 0; k < n; ++k) {
      a.push_back(std::vector<double>(planes[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].coeffs.begin(),
                                      planes[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].coeffs.end()));
      b.push_back(planes[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].rhs);
    }
    Vec x;
    if (!detail::solve_square(std::move(a), std::move(b), x)) continue;
    if (!feasible_point(x)) continue;
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += lp.var(j).cost * x[static_cast<std::size_t>(j)];
    if (!best.feasible || sg * obj < sg * best.value) {
      best.feasible = true;
      best.value = obj;
    }
  } while (advance());
  return best;
}

// Random LP with a planted feasible point inside finite boxes: never
// infeasible, never unbounded.
inline LinearProgram random_small_lp(DeterministicRng& rng, int max_vars = 5, int max_rows = 4) {
  const int n = 2 + static_cast<int>(rng.uniform01() * (max_vars - 1));
  const int m = 1 + static_cast<int>(rng.uniform01() * max_rows);
  LinearProgram lp(rng.uniform01() < 0.25 ? ObjSense::Maximize : ObjSense::Minimize);
  Vec witness;
  for (int j = 0; j < n; ++j) {
    const double ub = 1.0 + std::floor(rng.uniform01() * 4.0);
    const double cost = std::floor(rng.uniform01() * 7.0) - 3.0;
    lp.add_variable("v" + std::to_string(j), 0.0, ub, cost);
    witness.push_back(std::floor(rng.uniform01() * (ub + 1.0)));
  }
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> coeffs;
    double act = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform01() < 0.6) {
        const double v = std::floor(rng.uniform01() * 5.0) - 2.0;
        if (v != 0.0) {
          coeffs.push_back({j, v});
          act += v * witness[static_cast<std::size_t>(j)];
        }
      }
    }
    const double u = rng.uniform01();
    const double slack = std::floor(rng.uniform01() * 3.0);
    if (u < 0.25) {
      lp.add_row("r" + std::to_string(i), RowSense::Equal, act, std::move(coeffs));
    } else if (u < 0.65) {
      lp.add_row("r" + std::to_string(i), RowSense::LessEqual, act + slack, std::move(coeffs));
    } else {
      lp.add_row("r" + std::to_string(i), RowSense::GreaterEqual, act - slack, std::move(coeffs));
    }
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Random stagewise instances with guaranteed recourse: identity state
// dynamics, |B| column sums <= 1, and a +/- identity slack block priced at
// the global maximum cost so estimate_lipschitz is a valid bound.

inline Instance random_instance(std::uint64_t seed, int max_horizon = 3, int max_branches = 3,
                                int max_state_dim = 2) {
  DeterministicRng rng(seed);
  const int T = 2 + static_cast<int>(rng.uniform01() * (max_horizon - 1));
  const int nx = 1 + static_cast<int>(rng.uniform01() * max_state_dim) % max_state_dim;
  const int ny_base = 1 + static_cast<int>(rng.uniform01() * 2.0);
  const double slack_cost = 4.0;
  const double slack_bound = 30.0;

  Instance inst;
  inst.name = "random-" + std::to_string(seed);
  inst.horizon = T;
  inst.x0.resize(static_cast<std::size_t>(nx));
  const double xbar_val = 5.0 + std::floor(rng.uniform01() * 6.0);
  for (int i = 0; i < nx; ++i) {
    inst.x0[static_cast<std::size_t>(i)] = std::floor(rng.uniform01() * (xbar_val + 1.0));
  }

  for (int s = 0; s < T; ++s) {
    Stage st;
    st.xbar.assign(static_cast<std::size_t>(nx), xbar_val);
    st.ybar.assign(static_cast<std::size_t>(ny_base), 4.0 + std::floor(rng.uniform01() * 5.0));
    for (int k = 0; k < 2 * nx; ++k) st.ybar.push_back(slack_bound);

    const int J = s == 0 ? 1 + static_cast<int>(rng.uniform01() * (max_branches - 1))
                         : 1 + static_cast<int>(rng.uniform01() * max_branches) % max_branches;
    Vec probs(static_cast<std::size_t>(J), 0.0);
    double psum = 0.0;
    for (int j = 0; j < J; ++j) {
      probs[static_cast<std::size_t>(j)] = 1.0 + std::floor(rng.uniform01() * 4.0);
      psum += probs[static_cast<std::size_t>(j)];
    }
    for (double& p : probs) p /= psum;

    for (int j = 0; j < J; ++j) {
      StageRealization r;
      r.probability = probs[static_cast<std::size_t>(j)];
      r.A = SparseMatrix::identity(nx);
      r.B = SparseMatrix(nx, nx);
      for (int row = 0; row < nx; ++row) {
        for (int col = 0; col < nx; ++col) {
          if (rng.uniform01() < 0.7) {
            const double v = (std::floor(rng.uniform01() * 5.0) - 2.0) * 0.25;
            if (v != 0.0) r.B.add(row, col, v / nx);
          }
        }
      }
      r.T = SparseMatrix(nx, ny_base + 2 * nx);
      for (int row = 0; row < nx; ++row) {
        for (int k = 0; k < ny_base; ++k) {
          if (rng.uniform01() < 0.6) {
            const double v = std::floor(rng.uniform01() * 5.0) - 2.0;
            if (v != 0.0) r.T.add(row, k, v * 0.5);
          }
        }
        r.T.add(row, ny_base + row, 1.0);
        r.T.add(row, ny_base + nx + row, -1.0);
      }
      r.d.resize(static_cast<std::size_t>(nx));
      for (int row = 0; row < nx; ++row) {
        r.d[static_cast<std::size_t>(row)] = std::floor(rng.uniform01() * 9.0) - 4.0;
      }
      r.c.resize(static_cast<std::size_t>(ny_base + 2 * nx));
      for (int k = 0; k < ny_base; ++k) {
        r.c[static_cast<std::size_t>(k)] = std::floor(rng.uniform01() * 4.0);
      }
      for (int k = ny_base; k < ny_base + 2 * nx; ++k) {
        r.c[static_cast<std::size_t>(k)] = slack_cost;
      }
      st.realizations.push_back(std::move(r));
    }

    if (rng.uniform01() < 0.6) {
      const double alphas[] = {0.3, 0.5, 1.0};
      const double betas[] = {0.0, 0.5, 1.0};
      st.risk = {RiskSpec::Type::MeanAvar, alphas[static_cast<int>(rng.uniform01() * 3.0) % 3],
                 betas[static_cast<int>(rng.uniform01() * 3.0) % 3], {}};
    } else {
      const int K = 1 + static_cast<int>(rng.uniform01() * 3.0) % 3;
      std::vector<Vec> verts;
      for (int k = 0; k < K; ++k) {
        Vec q(static_cast<std::size_t>(J), 0.0);
        double qs = 0.0;
        for (int j = 0; j < J; ++j) {
          q[static_cast<std::size_t>(j)] = std::floor(rng.uniform01() * 9.0);
          qs += q[static_cast<std::size_t>(j)];
        }
        if (qs == 0.0) {
          q[0] = 1.0;
          qs = 1.0;
        }
        for (double& v : q) v /= qs;
        verts.push_back(std::move(q));
      }
      st.risk = {RiskSpec::Type::Polyhedral, 1.0, 1.0, std::move(verts)};
    }
    inst.stages.push_back(std::move(st));
  }

  const std::vector<Vec> lips = estimate_lipschitz(inst);
  for (int s = 0; s < T; ++s) inst.stages[static_cast<std::size_t>(s)].lipschitz = lips[static_cast<std::size_t>(s)];
  return inst;
}

}  // namespace dualsddp::testing
