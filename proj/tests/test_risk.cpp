#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "dualsddp/errors.hpp"
#include "dualsddp/risk.hpp"
#include "dualsddp/rng.hpp"
#include "dualsddp/simplex.hpp"

using namespace dualsddp;

namespace {

// Independent oracle for AV@R: minimize the Rockafellar-Uryasev objective
// q + E[(theta - q)^+] / alpha over q. The objective is piecewise linear in
// q with breakpoints exactly at the outcomes, so scanning them is exact.
double avar_ru_oracle(const Vec& theta, const Vec& p, double alpha) {
  double best = kInf;
  for (double q : theta) {
    double expect_pos = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      expect_pos += p[j] * std::max(theta[j] - q, 0.0);
    }
    best = std::min(best, q + expect_pos / alpha);
  }
  return best;
}

Vec random_simplex(DeterministicRng& rng, int J) {
  Vec p(static_cast<std::size_t>(J), 0.0);
  double s = 0.0;
  for (int j = 0; j < J; ++j) {
    p[static_cast<std::size_t>(j)] = 0.05 + rng.uniform01();
    s += p[static_cast<std::size_t>(j)];
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("avar on pinned examples") {
  CHECK(avar({0.0, 1.0}, {0.5, 0.5}, 0.5) == doctest::Approx(1.0));
  CHECK(avar({0.0, 1.0}, {0.5, 0.5}, 1.0) == doctest::Approx(0.5));
  CHECK(avar({5.0, 5.0, 5.0}, {0.2, 0.3, 0.5}, 0.7) == doctest::Approx(5.0));
  // The first example agrees with the RU-scan oracle.
  CHECK(avar({0.0, 1.0}, {0.5, 0.5}, 0.5) ==
        doctest::Approx(avar_ru_oracle({0.0, 1.0}, {0.5, 0.5}, 0.5)));
  CHECK_THROWS_AS(avar({0.0, 1.0}, {0.5, 0.5}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(avar({0.0, 1.0}, {0.5, 0.5}, -0.1), std::invalid_argument);
}

TEST_CASE("rho_mean_avar on pinned examples") {
  CHECK(rho_mean_avar({0.0, 1.0}, {0.5, 0.5}, 0.5, 0.0) == doctest::Approx(1.0));
  CHECK(rho_mean_avar({2.0, 6.0}, {0.25, 0.75}, 0.3, 1.0) == doctest::Approx(5.0));  // beta=1 is E
  // 0.5 * E[(1,3)] + 0.5 * AV@R_{1/2}[(1,3)] = 0.5 * 2 + 0.5 * 3.
  CHECK(rho_mean_avar({1.0, 3.0}, {0.5, 0.5}, 0.5, 0.5) == doctest::Approx(2.5));
  CHECK(avar_ru_oracle({1.0, 3.0}, {0.5, 0.5}, 0.5) == doctest::Approx(3.0));
}

TEST_CASE("avar equals the RU-scan oracle on random data") {
  DeterministicRng rng(11);
  for (int t = 0; t < 200; ++t) {
    const int J = 2 + static_cast<int>(rng.uniform01() * 5.0);
    const Vec p = random_simplex(rng, J);
    Vec theta(static_cast<std::size_t>(J));
    for (double& v : theta) v = rng.uniform(-5.0, 5.0);
    const double alpha = 0.05 + 0.95 * rng.uniform01();
    CHECK(avar(theta, p, alpha) == doctest::Approx(avar_ru_oracle(theta, p, alpha)).epsilon(1e-10));
  }
}

TEST_CASE("envelope constraints: expectation envelope pins gamma = p") {
  const Vec p = {0.3, 0.7};
  const RiskEnvelope env = RiskEnvelope::mean_avar(p, 0.5, 1.0);
  // Maximize and minimize each coordinate subject to the block; all four
  // extremes must coincide with p since beta = 1 forces the singleton {p}.
  for (int target = 0; target < 2; ++target) {
    for (double sign : {1.0, -1.0}) {
      LinearProgram lp(ObjSense::Maximize);
      std::vector<int> gamma = {lp.add_variable("g0", 0.0, kInf, sign * (target == 0 ? 1.0 : 0.0)),
                                lp.add_variable("g1", 0.0, kInf, sign * (target == 1 ? 1.0 : 0.0))};
      emit_envelope_constraints(lp, env, gamma, 1.0, "env");
      const LpSolution sol = solve_lp(lp);
      REQUIRE(sol.status == SolveStatus::Optimal);
      CHECK(sol.x[static_cast<std::size_t>(target)] ==
            doctest::Approx(p[static_cast<std::size_t>(target)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("envelope constraints: AV@R_{1/2} with two outcomes spans the simplex edge") {
  const RiskEnvelope env = RiskEnvelope::mean_avar({0.5, 0.5}, 0.5, 0.0);
  // Support function h(theta) = max_{gamma in Q} gamma . theta must equal
  // max(theta_1, theta_2) on the full edge.
  DeterministicRng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Vec theta = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    CHECK(rho_via_envelope(theta, env) ==
          doctest::Approx(std::max(theta[0], theta[1])).epsilon(1e-9));
  }
}

TEST_CASE("envelope constraints: vertex form scales with the mass") {
  const RiskEnvelope env = RiskEnvelope::from_vertices({{1.0, 0.0}, {0.0, 1.0}});
  LinearProgram lp(ObjSense::Maximize);
  std::vector<int> gamma = {lp.add_variable("g0", 0.0, kInf, 1.0),
                            lp.add_variable("g1", 0.0, kInf, 0.0)};
  emit_envelope_constraints(lp, env, gamma, 2.0, "env");
  const LpSolution sol = solve_lp(lp);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));  // segment from (2,0) to (0,2)
  CHECK(sol.x[0] + sol.x[1] == doctest::Approx(2.0));
}

TEST_CASE("envelope_vertices") {
  SUBCASE("AV@R_{1/2} box gives the unit vectors") {
    const auto verts = envelope_vertices(RiskEnvelope::mean_avar({0.5, 0.5}, 0.5, 0.0));
    REQUIRE(verts.size() == 2);
    const bool has10 = std::fabs(verts[0][0] - 1.0) < 1e-10 || std::fabs(verts[1][0] - 1.0) < 1e-10;
    const bool has01 = std::fabs(verts[0][1] - 1.0) < 1e-10 || std::fabs(verts[1][1] - 1.0) < 1e-10;
    CHECK(has10);
    CHECK(has01);
  }
  SUBCASE("beta = 1 gives the singleton {p}") {
    const auto verts = envelope_vertices(RiskEnvelope::mean_avar({0.25, 0.75}, 0.5, 1.0));
    REQUIRE(verts.size() == 1);
    CHECK(verts[0][0] == doctest::Approx(0.25));
    CHECK(verts[0][1] == doctest::Approx(0.75));
  }
  SUBCASE("alpha = 1, beta = 0 is also the singleton {p}") {
    const auto verts = envelope_vertices(RiskEnvelope::mean_avar({0.25, 0.75}, 1.0, 0.0));
    REQUIRE(verts.size() == 1);
    CHECK(verts[0][0] == doctest::Approx(0.25));
  }
  SUBCASE("duplicate and interior vertices are dropped") {
    const auto verts = envelope_vertices(
        RiskEnvelope::from_vertices({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}}));
    CHECK(verts.size() == 2);
  }
  SUBCASE("budget guard") {
    CHECK_THROWS_AS(envelope_vertices(RiskEnvelope::mean_avar(Vec(20, 0.05), 0.5, 0.0), 16),
                    BudgetError);
  }
}

TEST_CASE("rho_via_envelope on pinned examples") {
  CHECK(rho_via_envelope({0.0, 1.0}, RiskEnvelope::mean_avar({0.5, 0.5}, 0.5, 0.0)) ==
        doctest::Approx(1.0));
  CHECK(rho_via_envelope({5.0, 5.0, 5.0}, RiskEnvelope::mean_avar({0.2, 0.3, 0.5}, 0.4, 0.3)) ==
        doctest::Approx(5.0));
  CHECK(rho_via_envelope({1.0, 3.0}, RiskEnvelope::mean_avar({0.5, 0.5}, 0.5, 0.5)) ==
        doctest::Approx(2.5));
}

TEST_CASE("functional and set representations agree on random cases") {
  DeterministicRng rng(42);
  for (int t = 0; t < 200; ++t) {
    const int J = 2 + static_cast<int>(rng.uniform01() * 5.0);
    const Vec p = random_simplex(rng, J);
    Vec theta(static_cast<std::size_t>(J));
    for (double& v : theta) v = rng.uniform(-4.0, 4.0);
    const double alpha = 0.05 + 0.95 * rng.uniform01();
    const double beta = rng.uniform01();
    const double functional = rho_mean_avar(theta, p, alpha, beta);
    const double via_set = rho_via_envelope(theta, RiskEnvelope::mean_avar(p, alpha, beta));
    CHECK(std::fabs(functional - via_set) <= 1e-8);
  }
}

TEST_CASE("coherence identities") {
  DeterministicRng rng(7);
  for (int t = 0; t < 60; ++t) {
    const int J = 2 + static_cast<int>(rng.uniform01() * 4.0);
    const Vec p = random_simplex(rng, J);
    Vec theta(static_cast<std::size_t>(J));
    for (double& v : theta) v = rng.uniform(-4.0, 4.0);
    const double alpha = 0.1 + 0.9 * rng.uniform01();
    const double beta = rng.uniform01();
    const double base = rho_mean_avar(theta, p, alpha, beta);

    // Translation: rho[theta + c] = rho[theta] + c.
    const double c = rng.uniform(-2.0, 2.0);
    Vec shifted = theta;
    for (double& v : shifted) v += c;
    CHECK(std::fabs(rho_mean_avar(shifted, p, alpha, beta) - (base + c)) <= 1e-8);

    // Positive homogeneity: rho[t theta] = t rho[theta].
    const double scale = 2.0 * rng.uniform01();
    Vec scaled = theta;
    for (double& v : scaled) v *= scale;
    CHECK(std::fabs(rho_mean_avar(scaled, p, alpha, beta) - scale * base) <= 1e-8);

    // Monotonicity: componentwise increase never decreases the risk.
    Vec larger = theta;
    for (double& v : larger) v += rng.uniform01();
    CHECK(rho_mean_avar(larger, p, alpha, beta) >= base - 1e-8);
  }
}

TEST_CASE("vertices lie in the simplex and support the LP optima") {
  DeterministicRng rng(13);
  for (int t = 0; t < 25; ++t) {
    const int J = 2 + static_cast<int>(rng.uniform01() * 3.0);
    const Vec p = random_simplex(rng, J);
    const double alpha = 0.2 + 0.8 * rng.uniform01();
    const double beta = rng.uniform01();
    const RiskEnvelope env = RiskEnvelope::mean_avar(p, alpha, beta);
    const auto verts = envelope_vertices(env);
    for (const Vec& q : verts) {
      double s = 0.0;
      for (double v : q) {
        CHECK(v >= -1e-10);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    // rho computed over the vertex list must match the envelope LP, i.e.
    // the hull of the enumerated vertices contains every LP-optimal gamma.
    Vec theta(static_cast<std::size_t>(J));
    for (double& v : theta) v = rng.uniform(-3.0, 3.0);
    double vertex_max = -kInf;
    for (const Vec& q : verts) vertex_max = std::max(vertex_max, dot(q, theta));
    CHECK(std::fabs(vertex_max - rho_via_envelope(theta, env)) <= 1e-8);
  }
}

TEST_CASE("homogeneity of the emitted block: support functions scale linearly") {
  DeterministicRng rng(23);
  const Vec p = {0.2, 0.5, 0.3};
  const RiskEnvelope env = RiskEnvelope::mean_avar(p, 0.4, 0.3);
  for (double t : {0.3, 2.0, 7.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      Vec theta(3);
      for (double& v : theta) v = rng.uniform(-3.0, 3.0);
      LinearProgram lp(ObjSense::Maximize);
      std::vector<int> gamma;
      for (int j = 0; j < 3; ++j) {
        gamma.push_back(
            lp.add_variable("g" + std::to_string(j), 0.0, kInf, theta[static_cast<std::size_t>(j)]));
      }
      emit_envelope_constraints(lp, env, gamma, t, "env");
      const LpSolution sol = solve_lp(lp);
      REQUIRE(sol.status == SolveStatus::Optimal);
      CHECK(sol.objective == doctest::Approx(t * rho_via_envelope(theta, env)).epsilon(1e-8));
    }
  }
}

TEST_CASE("in_envelope membership") {
  const RiskEnvelope env = RiskEnvelope::mean_avar({0.5, 0.5}, 0.5, 0.0);
  CHECK(in_envelope(env, {0.3, 0.7}, 1.0));
  CHECK(in_envelope(env, {1.0, 0.0}, 1.0));
  CHECK_FALSE(in_envelope(env, {1.2, -0.2}, 1.0));
  CHECK(in_envelope(env, {0.6, 1.4}, 2.0));
}
