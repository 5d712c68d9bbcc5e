#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dualsddp/dual.hpp"
#include "dualsddp/oracles.hpp"
#include "dualsddp/rng.hpp"
#include "dualsddp/simplex.hpp"
#include "support/fixtures.hpp"

using namespace dualsddp;
using dualsddp::testing::random_instance;
using dualsddp::testing::tiny_defer;

TEST_CASE("terminal_dual_value closed form") {
  CHECK(terminal_dual_value({3.0}, 1.0, {10.0}) == doctest::Approx(-30.0));
  CHECK(terminal_dual_value({-3.0}, 1.0, {10.0}) == doctest::Approx(0.0));
  CHECK(terminal_dual_value({1.0, -2.0}, 0.4, {5.0, 7.0}) == doctest::Approx(-5.0));
}

TEST_CASE("dual stage LP: feasibility and the zero-mass branch") {
  const Instance inst = tiny_defer(0.5, 0.0);
  const DualApprox approx = init_upper_approx(inst);

  SUBCASE("state (0, 1) is feasible and bounded") {
    DualState state{1, {0.0}, 1.0};
    const DualStageSolve solve = solve_dual_stage(inst, 1, state, approx, 1e-9, 0);
    CHECK(std::isfinite(solve.value));
    CHECK(solve.value >= -10.0 * 10.0);  // crude recourse bound
  }
  SUBCASE("gamma = 0 forces a zero change of measure") {
    DualState state{1, {1.5}, 0.0};
    const DualStageSolve solve = solve_dual_stage(inst, 1, state, approx, 1e-9, 0);
    for (double g : solve.gammas) CHECK(g == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(std::isfinite(solve.value));
  }
  SUBCASE("stage value matches the exact recursion at sampled states") {
    // Stage T-1 uses the exact terminal model, so the LP value must equal
    // exact_dual_value everywhere inside the box.
    DeterministicRng rng(3);
    for (int t = 0; t < 12; ++t) {
      const double L1 = inst.stages[1].lipschitz[0];
      DualState state{1, {rng.uniform(-L1, L1)}, rng.uniform01()};
      const DualStageSolve solve = solve_dual_stage(inst, 1, state, approx, 1e-9, 0);
      const double truth = exact_dual_value(inst, 1, state.pi, state.gamma);
      CHECK(solve.value == doctest::Approx(truth).epsilon(1e-8));
    }
  }
}

TEST_CASE("sample_branch") {
  DeterministicRng rng(5);
  SUBCASE("degenerate weights pick the charged branch") {
    for (int t = 0; t < 20; ++t) CHECK(sample_branch({0.0, 1.0}, 0.0, rng) == 1);
  }
  SUBCASE("uniform weights are roughly balanced") {
    int ones = 0;
    for (int t = 0; t < 2000; ++t) ones += sample_branch({0.5, 0.5}, 0.0, rng);
    CHECK(ones > 850);
    CHECK(ones < 1150);
  }
  SUBCASE("smoothing reaches zero-mass branches with the stated frequency") {
    // P(branch 0) = 0.01 / 1.02.
    int zeros = 0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
      if (sample_branch({0.0, 1.0}, 0.01, rng) == 0) ++zeros;
    }
    const double expect = 0.01 / 1.02 * trials;
    CHECK(zeros > expect * 0.5);
    CHECK(zeros < expect * 2.0);
  }
  SUBCASE("all-zero weights with zero smoothing are rejected") {
    CHECK_THROWS_AS(sample_branch({0.0, 0.0}, 0.0, rng), std::invalid_argument);
  }
}

TEST_CASE("normalize_state") {
  const DualState a = normalize_state({1, {2.0, -4.0}, 0.5}, 1e-9);
  CHECK(a.pi[0] == doctest::Approx(4.0));
  CHECK(a.pi[1] == doctest::Approx(-8.0));
  CHECK(a.gamma == 1.0);

  const DualState b = normalize_state({1, {1.0}, 1e-12}, 1e-9);
  CHECK(b.pi[0] == doctest::Approx(1.0));
  CHECK(b.gamma == 0.0);

  const DualState c = normalize_state({1, {3.0}, 1.0}, 1e-9);
  CHECK(c.pi[0] == doctest::Approx(3.0));
  CHECK(c.gamma == 1.0);
}

TEST_CASE("init_upper_approx structure and weak duality at start") {
  const Instance inst = tiny_defer(0.5, 0.0);
  const DualApprox approx = init_upper_approx(inst);
  CHECK(approx.by_stage()[1].size() == 1);
  CHECK(approx.by_stage()[0].empty());  // the fused first stage needs no own cuts
  const auto [ub0, pi0] = solve_first_stage(inst, approx);
  CHECK(std::isfinite(ub0));
  CHECK(ub0 >= 3.0 - 1e-7);  // weak duality against the oracle value
  CHECK(pi0.size() == 1);

  SUBCASE("single-stage instance needs no sweep") {
    Instance one = tiny_defer(0.5, 0.0);
    one.horizon = 1;
    one.stages.resize(1);
    const DualApprox only_terminal = init_upper_approx(one);
    CHECK(only_terminal.by_stage()[0].empty());
    const auto [ub, pi] = solve_first_stage(one, only_terminal);
    CHECK(std::isfinite(ub));
    CHECK(ub >= solve_extensive_primal(one).value - 1e-7);
  }
}

TEST_CASE("solve_first_stage with a single synthetic cut reduces to its level") {
  const Instance inst = tiny_defer(0.5, 0.0);
  DualApprox approx(2);
  const double M = 57.0;
  approx.add(DualCut{1, {0.0}, M, 0});
  const auto [ub, pi0] = solve_first_stage(inst, approx);
  // x0 = 0 and stage-0 recourse is free, so the bound is the cut level M.
  CHECK(ub == doctest::Approx(M).epsilon(1e-9));
}

TEST_CASE("run_dual converges to the oracle value on tiny-defer") {
  struct Case {
    double alpha, beta, expected;
  };
  for (const Case& c : {Case{0.5, 0.0, 3.0}, Case{0.5, 1.0, 2.0}, Case{0.5, 0.5, 2.5}}) {
    const Instance inst = tiny_defer(c.alpha, c.beta);
    DualOptions opts;
    opts.seed = 17;
    const DualRunResult run = run_dual(inst, 50, opts);
    CHECK(run.ub_series.back() == doctest::Approx(c.expected).epsilon(1e-4));
    // Upper bounds never increase.
    for (std::size_t k = 1; k < run.ub_series.size(); ++k) {
      CHECK(run.ub_series[k] <= run.ub_series[k - 1] + 1e-9);
    }
    // Weak duality at every iteration.
    for (double ub : run.ub_series) CHECK(ub >= c.expected - 1e-7);
  }
}

TEST_CASE("zero iterations report the initialization bound") {
  const Instance inst = tiny_defer(0.5, 0.0);
  const DualRunResult run = run_dual(inst, 0);
  REQUIRE(run.ub_series.size() == 1);
  CHECK(run.ub_series[0] >= 3.0 - 1e-7);
}

TEST_CASE("determinism of the dual run") {
  const Instance inst = random_instance(77);
  DualOptions opts;
  opts.seed = 4242;
  const DualRunResult a = run_dual(inst, 10, opts);
  const DualRunResult b = run_dual(inst, 10, opts);
  REQUIRE(a.ub_series.size() == b.ub_series.size());
  for (std::size_t k = 0; k < a.ub_series.size(); ++k) CHECK(a.ub_series[k] == b.ub_series[k]);
}

TEST_CASE("stored cuts are homogeneous and valid above the exact dual value") {
  const Instance inst = tiny_defer(0.5, 0.0);
  DualOptions opts;
  opts.seed = 23;
  const DualRunResult run = run_dual(inst, 12, opts);

  // Exact homogeneity of the approximation: doubling (pi, gamma) doubles
  // the evaluation (zero intercepts make this an identity).
  DeterministicRng rng(9);
  for (int t = 0; t < 100; ++t) {
    const int stage = 1;
    const Vec pi = {rng.uniform(-2.0, 2.0)};
    const double gamma = rng.uniform01();
    const double v = run.approx.eval(stage, pi, gamma);
    const double v2 = run.approx.eval(stage, {2.0 * pi[0]}, 2.0 * gamma);
    CHECK(v2 == 2.0 * v);  // exact in floating point
  }

  // Validity: every stored stage-1 cut dominates the exact dual value on
  // random in-box states.
  const double L1 = inst.stages[1].lipschitz[0];
  for (int t = 0; t < 50; ++t) {
    const Vec pi = {rng.uniform(-L1, L1)};
    const double gamma = rng.uniform01();
    const double truth = exact_dual_value(inst, 1, pi, gamma);
    for (const DualCut& cut : run.approx.by_stage()[1]) {
      CHECK(dot(cut.x_slope, pi) + cut.z_slope * gamma >= truth - 1e-7);
    }
  }

  // Stage-0 cuts are overestimators of the fused-form exact value.
  for (int t = 0; t < 25; ++t) {
    const Vec pi = {rng.uniform(-4.0, 4.0)};
    const double gamma = rng.uniform01();
    const double truth = exact_dual_value(inst, 0, pi, gamma);
    if (!std::isfinite(truth)) continue;
    for (const DualCut& cut : run.approx.by_stage()[0]) {
      CHECK(dot(cut.x_slope, pi) + cut.z_slope * gamma >= truth - 1e-7);
    }
  }
}

TEST_CASE("per-stage mass conservation and sanity rate") {
  for (std::uint64_t seed : {81u, 82u}) {
    const Instance inst = random_instance(seed);
    DualOptions opts;
    opts.seed = seed;
    DualSddp sddp(inst, opts);
    for (int k = 0; k < 10; ++k) sddp.iterate();
    CHECK(sddp.sanity_warnings() == 0);
    CHECK(sddp.stage_solves() >= 10);
  }
  // Mass conservation at a stage solve, checked directly.
  const Instance inst = tiny_defer(0.5, 0.5);
  const DualApprox approx = init_upper_approx(inst);
  DeterministicRng rng(2);
  for (int t = 0; t < 10; ++t) {
    DualState state{1, {rng.uniform(-2.0, 2.0)}, rng.uniform01()};
    const DualStageSolve solve = solve_dual_stage(inst, 1, state, approx, 1e-9, 0);
    double mass = 0.0;
    for (double g : solve.gammas) mass += g;
    CHECK(mass == doctest::Approx(state.gamma).epsilon(1e-8));
    CHECK(solve.sanity_residual <= 1e-6);
  }
}

TEST_CASE("Lipschitz overestimation barely moves the settled bound") {
  const Instance base = tiny_defer(0.5, 0.0);
  DualOptions opts;
  opts.seed = 31;
  const double ub_base = run_dual(base, 50, opts).ub_series.back();
  for (double factor : {10.0, 100.0}) {
    Instance scaled = base;
    for (Stage& st : scaled.stages) {
      for (double& v : st.lipschitz) v *= factor;
    }
    const double ub_scaled = run_dual(scaled, 50, opts).ub_series.back();
    CHECK(std::fabs(ub_scaled - ub_base) <= 1e-3 * (1.0 + std::fabs(ub_base)));
  }
}

TEST_CASE("dual backward pass") {
  const Instance inst = tiny_defer(0.5, 0.0);
  DualOptions opts;
  opts.seed = 3;

  SUBCASE("one extra pass never worsens the bound") {
    DualSddp sddp(inst, opts);
    sddp.iterate();
    const double before = sddp.upper_bound();
    REQUIRE_FALSE(sddp.visited().empty());
    DualApprox approx = sddp.approx();
    dual_backward_pass(inst, sddp.visited().back(), approx, opts, 1);
    const double after = solve_first_stage(inst, approx).first;
    CHECK(after <= before + 1e-9);
  }
  SUBCASE("at the fixed point nothing moves") {
    const DualRunResult run = run_dual(inst, 60, opts);
    DualApprox approx = run.approx;
    const double before = solve_first_stage(inst, approx).first;
    REQUIRE_FALSE(run.visited.empty());
    dual_backward_pass(inst, run.visited.back(), approx, opts, 61);
    const double after = solve_first_stage(inst, approx).first;
    CHECK(before - after <= 1e-9 + 1e-9 * std::fabs(before));
    CHECK(after <= before + 1e-9);
  }
  SUBCASE("empty visited list changes nothing") {
    DualApprox approx = init_upper_approx(inst);
    const std::size_t cuts_before = approx.by_stage()[1].size();
    dual_backward_pass(inst, {}, approx, opts, 0);
    CHECK(approx.by_stage()[1].size() == cuts_before);
  }
  SUBCASE("in-loop backward mode converges too") {
    DualOptions with_backward = opts;
    with_backward.backward_pass = true;
    const DualRunResult run = run_dual(inst, 30, with_backward);
    CHECK(run.ub_series.back() == doctest::Approx(3.0).epsilon(1e-4));
  }
}

TEST_CASE("dual cut JSON round trip") {
  const Instance inst = tiny_defer(0.5, 0.0);
  const DualRunResult run = run_dual(inst, 4);
  const std::string text = dual_cuts_to_json(run.approx);
  const DualApprox parsed = dual_cuts_from_json(text);
  REQUIRE(parsed.horizon() == run.approx.horizon());
  for (int s = 0; s < parsed.horizon(); ++s) {
    REQUIRE(parsed.by_stage()[static_cast<std::size_t>(s)].size() ==
            run.approx.by_stage()[static_cast<std::size_t>(s)].size());
    for (std::size_t k = 0; k < parsed.by_stage()[static_cast<std::size_t>(s)].size(); ++k) {
      CHECK(parsed.by_stage()[static_cast<std::size_t>(s)][k].z_slope ==
            run.approx.by_stage()[static_cast<std::size_t>(s)][k].z_slope);
      CHECK(parsed.by_stage()[static_cast<std::size_t>(s)][k].x_slope ==
            run.approx.by_stage()[static_cast<std::size_t>(s)][k].x_slope);
    }
  }
}
