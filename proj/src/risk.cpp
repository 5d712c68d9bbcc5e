#include "dualsddp/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dualsddp/errors.hpp"
#include "dualsddp/simplex.hpp"

namespace dualsddp {

namespace {

void require_simplex_vector(const Vec& p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (v < -1e-12) throw std::invalid_argument(std::string(what) + ": negative entry");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(what) + ": entries sum to " + std::to_string(s));
  }
}

void require_alpha_beta(double alpha, double beta) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

}  // namespace

RiskEnvelope RiskEnvelope::mean_avar(Vec reference_p, double alpha, double beta) {
  require_alpha_beta(alpha, beta);
  require_simplex_vector(reference_p, "reference probabilities");
  RiskEnvelope env;
  env.kind_ = Kind::MeanAvarBox;
  env.J_ = static_cast<int>(reference_p.size());
  env.p_ = std::move(reference_p);
  env.alpha_ = alpha;
  env.beta_ = beta;
  return env;
}

RiskEnvelope RiskEnvelope::from_vertices(std::vector<Vec> vertices) {
  if (vertices.empty()) throw std::invalid_argument("vertex envelope needs at least one vertex");
  const std::size_t J = vertices.front().size();
  for (const Vec& q : vertices) {
    if (q.size() != J) throw std::invalid_argument("vertex envelope: inconsistent lengths");
    require_simplex_vector(q, "envelope vertex");
  }
  RiskEnvelope env;
  env.kind_ = Kind::Vertex;
  env.J_ = static_cast<int>(J);
  env.vertices_ = std::move(vertices);
  return env;
}

double avar(const Vec& theta, const Vec& p, double alpha) {
  if (theta.size() != p.size() || theta.empty()) {
    throw std::invalid_argument("avar: theta and p must have equal positive length");
  }
  require_alpha_beta(alpha, 0.0);
  require_simplex_vector(p, "probabilities");

  // Mean of the worst alpha-fraction: sort outcomes descending and absorb
  // probability mass alpha, splitting the marginal outcome.
  std::vector<int> idx(theta.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (theta[static_cast<std::size_t>(a)] != theta[static_cast<std::size_t>(b)]) {
      return theta[static_cast<std::size_t>(a)] > theta[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  double remaining = alpha;
  double acc = 0.0;
  for (int i : idx) {
    const double pi = p[static_cast<std::size_t>(i)];
    const double take = std::min(pi, remaining);
    acc += take * theta[static_cast<std::size_t>(i)];
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  return acc / alpha;
}

double rho_mean_avar(const Vec& theta, const Vec& p, double alpha, double beta) {
  require_alpha_beta(alpha, beta);
  double mean = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) mean += p[j] * theta[j];
  if (beta == 1.0) return mean;
  return beta * mean + (1.0 - beta) * avar(theta, p, alpha);
}

EnvelopeEmission emit_envelope_constraints(LinearProgram& lp, const RiskEnvelope& env,
                                           const std::vector<int>& gamma_vars,
                                           std::variant<double, int> gamma_total,
                                           const std::string& tag) {
  const int J = env.num_outcomes();
  if (static_cast<int>(gamma_vars.size()) != J) {
    throw std::invalid_argument("emit_envelope_constraints: gamma variable count mismatch");
  }
  EnvelopeEmission out;

  // Mass variable: the single carrier of gamma_total. Every other row below
  // is homogeneous in the LP variables.
  int mass;
  if (std::holds_alternative<int>(gamma_total)) {
    mass = std::get<int>(gamma_total);
  } else {
    mass = lp.add_variable(tag + ".mass", 0.0, kInf, 0.0);
    out.gamma_scale_var = mass;
    out.mass_row = lp.add_row(tag + ".mass_link", RowSense::Equal, std::get<double>(gamma_total),
                              {{mass, 1.0}});
    out.rows.push_back(out.mass_row);
  }

  if (env.kind() == RiskEnvelope::Kind::MeanAvarBox) {
    const Vec& p = env.reference_p();
    const double beta = env.beta();
    const double cap = (1.0 - beta) / env.alpha();
    std::vector<int> delta(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      delta[static_cast<std::size_t>(j)] =
          lp.add_variable(tag + ".delta[" + std::to_string(j) + "]", 0.0, kInf, 0.0);
      out.aux_vars.push_back(delta[static_cast<std::size_t>(j)]);
    }
    // sum_j p_j delta_j = (1 - beta) * mass
    {
      std::vector<std::pair<int, double>> coeffs;
      for (int j = 0; j < J; ++j) {
        if (p[static_cast<std::size_t>(j)] != 0.0) {
          coeffs.push_back({delta[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)]});
        }
      }
      coeffs.push_back({mass, -(1.0 - beta)});
      out.rows.push_back(lp.add_row(tag + ".budget", RowSense::Equal, 0.0, std::move(coeffs)));
    }
    for (int j = 0; j < J; ++j) {
      const double pj = p[static_cast<std::size_t>(j)];
      // gamma_j = p_j * (beta * mass + delta_j)
      out.rows.push_back(lp.add_row(tag + ".gamma[" + std::to_string(j) + "]", RowSense::Equal, 0.0,
                                    {{gamma_vars[static_cast<std::size_t>(j)], 1.0},
                                     {mass, -beta * pj},
                                     {delta[static_cast<std::size_t>(j)], -pj}}));
      // delta_j <= (1 - beta) / alpha * mass
      out.rows.push_back(lp.add_row(tag + ".cap[" + std::to_string(j) + "]", RowSense::LessEqual,
                                    0.0,
                                    {{delta[static_cast<std::size_t>(j)], 1.0}, {mass, -cap}}));
    }
  } else {
    const auto& verts = env.vertices();
    const int K = static_cast<int>(verts.size());
    std::vector<int> phi(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      phi[static_cast<std::size_t>(k)] =
          lp.add_variable(tag + ".phi[" + std::to_string(k) + "]", 0.0, kInf, 0.0);
      out.aux_vars.push_back(phi[static_cast<std::size_t>(k)]);
    }
    // sum_k phi_k = mass
    {
      std::vector<std::pair<int, double>> coeffs;
      for (int k = 0; k < K; ++k) coeffs.push_back({phi[static_cast<std::size_t>(k)], 1.0});
      coeffs.push_back({mass, -1.0});
      out.rows.push_back(lp.add_row(tag + ".hull", RowSense::Equal, 0.0, std::move(coeffs)));
    }
    for (int j = 0; j < J; ++j) {
      std::vector<std::pair<int, double>> coeffs{{gamma_vars[static_cast<std::size_t>(j)], 1.0}};
      for (int k = 0; k < K; ++k) {
        const double q = verts[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (q != 0.0) coeffs.push_back({phi[static_cast<std::size_t>(k)], -q});
      }
      out.rows.push_back(
          lp.add_row(tag + ".gamma[" + std::to_string(j) + "]", RowSense::Equal, 0.0, std::move(coeffs)));
    }
  }
  return out;
}

namespace {

bool near(const Vec& a, const Vec& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::fabs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

// Is point v inside the convex hull of the other points? (LP feasibility)
bool in_hull_of_others(const std::vector<Vec>& pts, std::size_t skip, double lp_tol) {
  const std::size_t J = pts[skip].size();
  LinearProgram lp(ObjSense::Minimize);
  std::vector<int> lam;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k == skip) continue;
    lam.push_back(lp.add_variable("l" + std::to_string(k), 0.0, kInf, 0.0));
  }
  if (lam.empty()) return false;
  {
    std::vector<std::pair<int, double>> coeffs;
    for (int v : lam) coeffs.push_back({v, 1.0});
    lp.add_row("sum", RowSense::Equal, 1.0, std::move(coeffs));
  }
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<std::pair<int, double>> coeffs;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == skip) continue;
      coeffs.push_back({lam[idx++], pts[k][j]});
    }
    lp.add_row("c" + std::to_string(j), RowSense::Equal, pts[skip][j], std::move(coeffs));
  }
  return solve_lp(lp, lp_tol).status == SolveStatus::Optimal;
}

}  // namespace

std::vector<Vec> envelope_vertices(const RiskEnvelope& env, int max_outcomes) {
  const int J = env.num_outcomes();
  if (J > max_outcomes) {
    throw BudgetError("envelope_vertices: " + std::to_string(J) + " outcomes exceeds budget " +
                      std::to_string(max_outcomes) + " (exponential enumeration)");
  }
  std::vector<Vec> verts;
  const double dedupe_tol = 1e-10;

  if (env.kind() == RiskEnvelope::Kind::MeanAvarBox) {
    // Vertices of the box {0 <= delta <= cap} cut by E_p[delta] = 1 - beta
    // have at most one coordinate strictly between its bounds. Enumerate the
    // fractional coordinate (or none) and each bound assignment elsewhere.
    const Vec& p = env.reference_p();
    const double beta = env.beta();
    const double cap = (1.0 - beta) / env.alpha();
    const double target = 1.0 - beta;
    auto push = [&](const Vec& delta) {
      Vec q(static_cast<std::size_t>(J));
      for (int j = 0; j < J; ++j) {
        q[static_cast<std::size_t>(j)] =
            p[static_cast<std::size_t>(j)] * (beta + delta[static_cast<std::size_t>(j)]);
      }
      for (const Vec& existing : verts) {
        if (near(existing, q, dedupe_tol)) return;
      }
      verts.push_back(std::move(q));
    };
    const int combos = 1 << J;
    for (int frac = -1; frac < J; ++frac) {
      for (int mask = 0; mask < combos; ++mask) {
        if (frac >= 0 && (mask & (1 << frac))) continue;
        Vec delta(static_cast<std::size_t>(J), 0.0);
        double mass = 0.0;
        for (int j = 0; j < J; ++j) {
          if (j == frac) continue;
          if (mask & (1 << j)) {
            delta[static_cast<std::size_t>(j)] = cap;
            mass += p[static_cast<std::size_t>(j)] * cap;
          }
        }
        if (frac < 0) {
          if (std::fabs(mass - target) <= 1e-12) push(delta);
        } else {
          const double pf = p[static_cast<std::size_t>(frac)];
          if (pf <= 0.0) continue;
          const double need = (target - mass) / pf;
          if (need >= -1e-12 && need <= cap + 1e-12) {
            delta[static_cast<std::size_t>(frac)] = std::clamp(need, 0.0, cap);
            push(delta);
          }
        }
      }
    }
  } else {
    for (const Vec& q : env.vertices()) {
      bool dup = false;
      for (const Vec& existing : verts) {
        if (near(existing, q, dedupe_tol)) {
          dup = true;
          break;
        }
      }
      if (!dup) verts.push_back(q);
    }
  }

  // Drop points interior to the hull of the others.
  if (verts.size() > 1) {
    std::vector<Vec> extreme;
    for (std::size_t k = 0; k < verts.size(); ++k) {
      std::vector<Vec> pool = extreme;
      for (std::size_t r = k + 1; r < verts.size(); ++r) pool.push_back(verts[r]);
      pool.push_back(verts[k]);
      if (!in_hull_of_others(pool, pool.size() - 1, 1e-10)) extreme.push_back(verts[k]);
    }
    verts = std::move(extreme);
  }
  return verts;
}

double rho_via_envelope(const Vec& theta, const RiskEnvelope& env, double lp_tol) {
  const int J = env.num_outcomes();
  if (static_cast<int>(theta.size()) != J) {
    throw std::invalid_argument("rho_via_envelope: theta length mismatch");
  }
  LinearProgram lp(ObjSense::Maximize);
  std::vector<int> gamma(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    gamma[static_cast<std::size_t>(j)] = lp.add_variable("g" + std::to_string(j), 0.0, kInf,
                                                         theta[static_cast<std::size_t>(j)]);
  }
  emit_envelope_constraints(lp, env, gamma, 1.0, "env");
  const LpSolution sol = solve_lp(lp, lp_tol);
  if (sol.status != SolveStatus::Optimal) {
    throw SolverError("rho_via_envelope: envelope LP not optimal");
  }
  return sol.objective;
}

bool in_envelope(const RiskEnvelope& env, const Vec& gamma, double gamma_total, double tol) {
  const int J = env.num_outcomes();
  if (static_cast<int>(gamma.size()) != J) return false;
  LinearProgram lp(ObjSense::Minimize);
  std::vector<int> g(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const double v = gamma[static_cast<std::size_t>(j)];
    g[static_cast<std::size_t>(j)] =
        lp.add_variable("g" + std::to_string(j), v - tol, v + tol, 0.0);
  }
  emit_envelope_constraints(lp, env, g, gamma_total, "env");
  return solve_lp(lp).status == SolveStatus::Optimal;
}

}  // namespace dualsddp
