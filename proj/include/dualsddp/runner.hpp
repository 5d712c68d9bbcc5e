#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dualsddp/hydro.hpp"
#include "dualsddp/model.hpp"

namespace dualsddp {

enum class RunMode { Primal, Dual, Both, Extensive, LipschitzStudy, Philpott };

/// Process exit semantics: 0 converged, 1 error, 2 iteration-capped.
enum class RunStatus : int { Converged = 0, Error = 1, IterationCapped = 2 };

struct RunConfig {
  RunMode mode = RunMode::Both;
  int iters = 100;
  double tol = 1e-4;  // relative gap (UB - LB) / max(|LB|, 1)
  std::uint64_t seed = 1;
  double epsilon = -1.0;          // dual branch smoothing; < 0 picks 1e-2 / J_t
  double gamma_round_tol = 1e-9;
  std::vector<double> lipschitz_factors = {1.0, 10.0, 100.0};
  std::string out_dir;            // empty: no artifact files
  int philpott_every = 50;
  bool dual_backward = false;
  bool parallel_arms = false;
  double lp_tol = 1e-9;
  std::ostream* log = nullptr;
  // Injectable millisecond clock so identical runs can produce identical
  // artifacts under test; defaults to the steady clock.
  std::function<double()> now_ms;
};

struct ConvergenceRecord {
  int iter = 0;
  std::optional<double> lb;
  std::optional<double> ub;
  std::optional<double> gap;
  double t_ms = 0.0;  // cumulative wall time
  std::optional<double> primal_ms;
  std::optional<double> dual_ms;
};

struct RunResult {
  RunStatus status = RunStatus::Error;
  std::vector<ConvergenceRecord> records;
  std::optional<double> final_lb;
  std::optional<double> final_ub;
  std::optional<double> extensive_value;
  std::optional<double> philpott_root;
};

std::vector<std::string> validate_config(const RunConfig& config);

/// Orchestrates one run. Mode both interleaves one primal and one dual
/// iteration, stopping at gap <= tol or at the iteration cap; artifacts
/// (convergence CSV, cut pools) land in out_dir when set.
RunResult run_command(const RunConfig& config, const Instance& inst);

/// Header exactly `iter,lb,ub,gap,t_ms,primal_ms,dual_ms`; one row per
/// record; 12 significant digits; empty fields for absent values;
/// deterministic bytes for identical records.
void emit_convergence_csv(const std::vector<ConvergenceRecord>& records, std::ostream& os);
void emit_convergence_csv_file(const std::vector<ConvergenceRecord>& records,
                               const std::string& path);

struct LipschitzStudyResult {
  std::vector<int> checkpoints;
  std::vector<double> factors;
  std::vector<Vec> gaps_percent;  // [factor][checkpoint], relative gaps in %
  double reference_lb = 0.0;
};

/// Same-seed dual runs with the stage Lipschitz constants scaled by each
/// factor, reported as relative gaps against the best primal lower bound at
/// checkpoints {1, 10, 20, 50, 100, 200, ...}.
LipschitzStudyResult run_lipschitz_study(const Instance& inst, const RunConfig& config);

void emit_lipschitz_csv(const LipschitzStudyResult& study, std::ostream& os);

struct TimingRow {
  int branches = 0;
  double primal_ms = 0.0;  // mean per-iteration time near the last iteration
  double dual_ms = 0.0;
  double ratio = 0.0;
};

struct TimingReport {
  std::vector<TimingRow> rows;
};

/// Per-iteration primal vs dual timing over regenerated instances with the
/// requested branch counts. Raw numbers only; trends are asserted by the
/// acceptance suite, not here.
TimingReport timing_report(const HydroConfig& config, const std::vector<int>& branch_counts,
                           int iters, const RunConfig& base);

void emit_timing_csv(const TimingReport& report, std::ostream& os);

}  // namespace dualsddp
