#include "dualsddp/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include "dualsddp/dual.hpp"
#include "dualsddp/errors.hpp"
#include "dualsddp/oracles.hpp"
#include "dualsddp/primal.hpp"

namespace dualsddp {

namespace {

double steady_now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

double relative_gap(double lb, double ub) { return (ub - lb) / std::max(std::fabs(lb), 1.0); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

std::vector<int> study_checkpoints(int iters) {
  std::vector<int> cps = {1, 10, 20, 50, 100};
  for (int c = 200; c <= iters; c += 100) cps.push_back(c);
  cps.erase(std::remove_if(cps.begin(), cps.end(), [&](int c) { return c > iters; }), cps.end());
  return cps;
}

Instance scale_lipschitz(const Instance& inst, double factor) {
  Instance scaled = inst;
  for (Stage& st : scaled.stages) {
    for (double& v : st.lipschitz) v *= factor;
  }
  return scaled;
}

DualOptions dual_options_from(const RunConfig& config) {
  DualOptions opts;
  opts.seed = config.seed;
  opts.epsilon = config.epsilon;
  opts.gamma_round_tol = config.gamma_round_tol;
  opts.lp_tol = config.lp_tol;
  opts.backward_pass = config.dual_backward;
  opts.log = config.log;
  return opts;
}

TrialPointSet trials_from_trajectories(const Instance& inst,
                                       const std::vector<PrimalTrajectory>& trajectories) {
  TrialPointSet trials;
  trials.by_stage.resize(static_cast<std::size_t>(inst.horizon));
  const double dedupe_tol = 1e-9;
  for (const PrimalTrajectory& traj : trajectories) {
    for (std::size_t s = 1; s < traj.size(); ++s) {
      const Vec& x = traj[s].incoming;
      auto& pool = trials.by_stage[s];
      bool dup = false;
      for (const Vec& existing : pool) {
        double diff = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::fabs(x[i] - existing[i]));
        if (diff <= dedupe_tol) {
          dup = true;
          break;
        }
      }
      if (!dup) pool.push_back(x);
    }
  }
  return trials;
}

}  // namespace

std::vector<std::string> validate_config(const RunConfig& config) {
  std::vector<std::string> issues;
  if (!(config.tol > 0.0)) issues.push_back("tol must be positive");
  if (config.iters < 0) issues.push_back("iters must be nonnegative");
  for (double f : config.lipschitz_factors) {
    if (f < 1.0) issues.push_back("lipschitz factors must be >= 1");
  }
  if (config.philpott_every <= 0) issues.push_back("philpott checkpoint period must be positive");
  return issues;
}

void emit_convergence_csv(const std::vector<ConvergenceRecord>& records, std::ostream& os) {
  os << "iter,lb,ub,gap,t_ms,primal_ms,dual_ms\n";
  for (const ConvergenceRecord& r : records) {
    os << r.iter << ',' << fmt_opt(r.lb) << ',' << fmt_opt(r.ub) << ',' << fmt_opt(r.gap) << ','
       << fmt(r.t_ms) << ',' << fmt_opt(r.primal_ms) << ',' << fmt_opt(r.dual_ms) << '\n';
  }
}

void emit_convergence_csv_file(const std::vector<ConvergenceRecord>& records,
                               const std::string& path) {
  std::ostringstream os;
  emit_convergence_csv(records, os);
  write_file(path, os.str());
}

RunResult run_command(const RunConfig& config, const Instance& inst) {
  {
    const std::vector<std::string> issues = validate_config(config);
    if (!issues.empty()) {
      std::ostringstream os;
      os << "invalid run config:";
      for (const std::string& i : issues) os << " " << i << ";";
      throw Error(os.str());
    }
  }
  const std::function<double()> now = config.now_ms ? config.now_ms : steady_now_ms;
  const bool artifacts = !config.out_dir.empty();
  if (artifacts) std::filesystem::create_directories(config.out_dir);

  RunResult result;
  const double t0 = now();

  switch (config.mode) {
    case RunMode::Extensive: {
      result.extensive_value = solve_extensive_primal(inst, 4000, config.lp_tol).value;
      result.status = RunStatus::Converged;
      if (config.log) *config.log << "extensive value: " << fmt(*result.extensive_value) << "\n";
      break;
    }

    case RunMode::Primal: {
      PrimalSddp primal(inst, config.seed, config.lp_tol);
      for (int k = 1; k <= config.iters; ++k) {
        const double tp = now();
        const double lb = primal.iterate();
        ConvergenceRecord rec;
        rec.iter = k;
        rec.lb = lb;
        rec.primal_ms = now() - tp;
        rec.t_ms = now() - t0;
        result.records.push_back(rec);
        result.final_lb = lb;
      }
      result.status = RunStatus::IterationCapped;
      if (artifacts) {
        write_file(config.out_dir + "/primal_cuts.json", primal_cuts_to_json(primal.pools()));
      }
      break;
    }

    case RunMode::Dual: {
      DualSddp dual(inst, dual_options_from(config));
      for (int k = 1; k <= config.iters; ++k) {
        const double td = now();
        const double ub = dual.iterate();
        ConvergenceRecord rec;
        rec.iter = k;
        rec.ub = ub;
        rec.dual_ms = now() - td;
        rec.t_ms = now() - t0;
        result.records.push_back(rec);
        result.final_ub = ub;
      }
      if (config.iters == 0) result.final_ub = dual.upper_bound();
      result.status = RunStatus::IterationCapped;
      if (artifacts) {
        write_file(config.out_dir + "/dual_cuts.json", dual_cuts_to_json(dual.approx()));
      }
      break;
    }

    case RunMode::Both: {
      PrimalSddp primal(inst, config.seed, config.lp_tol);
      DualSddp dual(inst, dual_options_from(config));
      result.status = RunStatus::IterationCapped;
      for (int k = 1; k <= config.iters; ++k) {
        const double tp = now();
        const double lb = primal.iterate();
        const double td = now();
        const double ub = dual.iterate();
        const double te = now();
        ConvergenceRecord rec;
        rec.iter = k;
        rec.lb = lb;
        rec.ub = ub;
        rec.gap = relative_gap(lb, ub);
        rec.primal_ms = td - tp;
        rec.dual_ms = te - td;
        rec.t_ms = te - t0;
        result.records.push_back(rec);
        result.final_lb = lb;
        result.final_ub = ub;
        if (config.log) {
          *config.log << "iter " << k << ": lb=" << fmt(lb) << " ub=" << fmt(ub)
                      << " gap=" << fmt(*rec.gap) << "\n";
        }
        if (*rec.gap <= config.tol) {
          result.status = RunStatus::Converged;
          break;
        }
      }
      if (artifacts) {
        write_file(config.out_dir + "/primal_cuts.json", primal_cuts_to_json(primal.pools()));
        write_file(config.out_dir + "/dual_cuts.json", dual_cuts_to_json(dual.approx()));
      }
      break;
    }

    case RunMode::Philpott: {
      PrimalSddp primal(inst, config.seed, config.lp_tol);
      std::ostringstream philpott_csv;
      philpott_csv << "iter,philpott_ub\n";
      for (int k = 1; k <= config.iters; ++k) {
        const double tp = now();
        const double lb = primal.iterate();
        ConvergenceRecord rec;
        rec.iter = k;
        rec.lb = lb;
        rec.primal_ms = now() - tp;
        rec.t_ms = now() - t0;
        result.final_lb = lb;
        if (k % config.philpott_every == 0 || k == config.iters) {
          const TrialPointSet trials = trials_from_trajectories(inst, primal.trajectories());
          const PhilpottResult ph = philpott_upper_bound(inst, trials, config.lp_tol);
          rec.ub = ph.root_upper_bound;
          rec.gap = relative_gap(lb, ph.root_upper_bound);
          result.philpott_root = ph.root_upper_bound;
          result.final_ub = ph.root_upper_bound;
          philpott_csv << k << ',' << fmt(ph.root_upper_bound) << '\n';
        }
        result.records.push_back(rec);
      }
      result.status = RunStatus::IterationCapped;
      if (result.final_lb && result.final_ub &&
          relative_gap(*result.final_lb, *result.final_ub) <= config.tol) {
        result.status = RunStatus::Converged;
      }
      if (artifacts) write_file(config.out_dir + "/philpott.csv", philpott_csv.str());
      break;
    }

    case RunMode::LipschitzStudy: {
      const LipschitzStudyResult study = run_lipschitz_study(inst, config);
      if (artifacts) {
        std::ostringstream os;
        emit_lipschitz_csv(study, os);
        write_file(config.out_dir + "/lipstudy.csv", os.str());
      }
      result.status = RunStatus::Converged;
      result.final_lb = study.reference_lb;
      break;
    }
  }

  if (artifacts && !result.records.empty()) {
    emit_convergence_csv_file(result.records, config.out_dir + "/convergence.csv");
  }
  return result;
}

LipschitzStudyResult run_lipschitz_study(const Instance& inst, const RunConfig& config) {
  LipschitzStudyResult study;
  study.checkpoints = study_checkpoints(config.iters);
  study.factors = config.lipschitz_factors;

  const PrimalRunResult primal = run_primal(inst, config.iters, config.seed, config.lp_tol);
  study.reference_lb = primal.lb_series.back();

  auto run_arm = [&](double factor) {
    const Instance scaled = scale_lipschitz(inst, factor);
    DualOptions opts = dual_options_from(config);
    opts.log = nullptr;  // arms may run concurrently
    const DualRunResult dual = run_dual(scaled, config.iters, opts);
    Vec gaps;
    gaps.reserve(study.checkpoints.size());
    for (int c : study.checkpoints) {
      // Iteration c reports the bound available at that iteration's
      // first-stage solve, i.e. after c-1 forward passes.
      const double ub = dual.ub_series[static_cast<std::size_t>(c - 1)];
      gaps.push_back(100.0 * relative_gap(study.reference_lb, ub));
    }
    return gaps;
  };

  study.gaps_percent.resize(study.factors.size());
  if (config.parallel_arms) {
    std::vector<std::future<Vec>> futures;
    futures.reserve(study.factors.size());
    for (double f : study.factors) {
      futures.push_back(std::async(std::launch::async, run_arm, f));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) study.gaps_percent[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < study.factors.size(); ++i) {
      study.gaps_percent[i] = run_arm(study.factors[i]);
    }
  }
  return study;
}

void emit_lipschitz_csv(const LipschitzStudyResult& study, std::ostream& os) {
  os << "factor";
  for (int c : study.checkpoints) os << ",iter" << c;
  os << '\n';
  for (std::size_t i = 0; i < study.factors.size(); ++i) {
    os << fmt(study.factors[i]);
    for (double g : study.gaps_percent[i]) os << ',' << fmt(g);
    os << '\n';
  }
}

TimingReport timing_report(const HydroConfig& config, const std::vector<int>& branch_counts,
                           int iters, const RunConfig& base) {
  if (iters < 1) throw Error("timing_report: at least one iteration required");
  const std::function<double()> now = base.now_ms ? base.now_ms : steady_now_ms;
  TimingReport report;
  for (int J : branch_counts) {
    const Instance inst = build_hydro_instance(config, J);
    const int window = std::min(5, std::max(1, iters));

    PrimalSddp primal(inst, base.seed, base.lp_tol);
    Vec ptimes;
    for (int k = 0; k < iters; ++k) {
      const double t0 = now();
      primal.iterate();
      ptimes.push_back(now() - t0);
    }
    DualSddp dual(inst, dual_options_from(base));
    Vec dtimes;
    for (int k = 0; k < iters; ++k) {
      const double t0 = now();
      dual.iterate();
      dtimes.push_back(now() - t0);
    }

    auto tail_mean = [&](const Vec& v) {
      double s = 0.0;
      for (int k = 0; k < window; ++k) s += v[v.size() - 1 - static_cast<std::size_t>(k)];
      return s / window;
    };
    TimingRow row;
    row.branches = J;
    row.primal_ms = tail_mean(ptimes);
    row.dual_ms = tail_mean(dtimes);
    row.ratio = row.dual_ms / std::max(row.primal_ms, 1e-9);
    report.rows.push_back(row);
    if (base.log) {
      *base.log << "timing J=" << J << ": primal=" << fmt(row.primal_ms)
                << " ms, dual=" << fmt(row.dual_ms) << " ms, ratio=" << fmt(row.ratio) << "\n";
    }
  }
  return report;
}

void emit_timing_csv(const TimingReport& report, std::ostream& os) {
  os << "branches,primal_ms,dual_ms,ratio\n";
  for (const TimingRow& r : report.rows) {
    os << r.branches << ',' << fmt(r.primal_ms) << ',' << fmt(r.dual_ms) << ',' << fmt(r.ratio)
       << '\n';
  }
}

}  // namespace dualsddp
