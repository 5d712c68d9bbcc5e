#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dualsddp/errors.hpp"
#include "dualsddp/json_io.hpp"
#include "dualsddp/runner.hpp"

namespace {

using namespace dualsddp;

RunMode parse_mode(const std::string& mode) {
  if (mode == "primal") return RunMode::Primal;
  if (mode == "dual") return RunMode::Dual;
  if (mode == "both") return RunMode::Both;
  if (mode == "extensive") return RunMode::Extensive;
  if (mode == "lipschitz-study") return RunMode::LipschitzStudy;
  if (mode == "philpott") return RunMode::Philpott;
  throw CLI::ValidationError("--mode", "unknown mode '" + mode + "'");
}

double lp_tol_from_env(double fallback) {
  const char* env = std::getenv("DUALSDDP_LP_TOL");
  if (env == nullptr) return fallback;
  try {
    return std::stod(env);
  } catch (...) {
    throw Error("DUALSDDP_LP_TOL is not a number");
  }
}

int run_solve(const std::string& instance_path, const std::string& mode, RunConfig config) {
  config.mode = parse_mode(mode);
  config.lp_tol = lp_tol_from_env(config.lp_tol);
  config.log = &std::cout;
  const Instance inst = load_instance_file(instance_path);
  const RunResult result = run_command(config, inst);
  if (result.extensive_value) std::cout << *result.extensive_value << "\n";
  if (result.final_lb) std::cout << "final lb: " << *result.final_lb << "\n";
  if (result.final_ub) std::cout << "final ub: " << *result.final_ub << "\n";
  switch (result.status) {
    case RunStatus::Converged:
      std::cout << "status: converged\n";
      break;
    case RunStatus::IterationCapped:
      std::cout << "status: iteration-capped\n";
      break;
    case RunStatus::Error:
      std::cout << "status: error\n";
      break;
  }
  return static_cast<int>(result.status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-averse multistage LP solver: primal SDDP lower bounds and "
               "deterministic dual SDDP upper bounds"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Run primal/dual/both/extensive/philpott on an instance");
  std::string instance_path, mode = "both", out_dir;
  RunConfig config;
  solve->add_option("--instance", instance_path, "Instance JSON file")->required();
  solve->add_option("--mode", mode, "primal | dual | both | extensive | lipschitz-study | philpott");
  solve->add_option("--iters", config.iters, "Iteration cap");
  solve->add_option("--tol", config.tol, "Relative-gap stopping tolerance");
  solve->add_option("--seed", config.seed, "Sampling seed");
  solve->add_option("--epsilon", config.epsilon, "Dual branch smoothing (default 1e-2 / J_t)");
  solve->add_option("--gamma-tol", config.gamma_round_tol, "Mass round-down tolerance");
  solve->add_option("--philpott-every", config.philpott_every, "Philpott checkpoint period");
  solve->add_flag("--dual-backward", config.dual_backward, "Extra dual backward pass per iteration");
  solve->add_option("--out", out_dir, "Artifact directory");

  // hydro-gen
  auto* hydro = app.add_subcommand("hydro-gen", "Generate a hydrothermal instance from a config");
  std::string hydro_config_path, hydro_out;
  int hydro_branches = 0;
  hydro->add_option("--config", hydro_config_path, "Hydro config JSON")->required();
  hydro->add_option("--out", hydro_out, "Output instance file")->required();
  hydro->add_option("--branches", hydro_branches, "Override scenario count per stage");

  // lipstudy
  auto* lip = app.add_subcommand("lipstudy", "Lipschitz-factor sensitivity study");
  std::string lip_instance, lip_out, lip_factors = "1,10,100";
  RunConfig lip_config;
  lip->add_option("--instance", lip_instance, "Instance JSON file")->required();
  lip->add_option("--factors", lip_factors, "Comma-separated factors (>= 1)");
  lip->add_option("--iters", lip_config.iters, "Iterations per arm");
  lip->add_option("--seed", lip_config.seed, "Sampling seed");
  lip->add_flag("--parallel", lip_config.parallel_arms, "Run arms concurrently");
  lip->add_option("--out", lip_out, "Artifact directory");

  // timing
  auto* timing = app.add_subcommand("timing", "Primal vs dual per-iteration timing");
  std::string timing_config_path, timing_out, timing_branches = "5,10,20";
  int timing_iters = 25;
  timing->add_option("--config", timing_config_path, "Hydro config JSON")->required();
  timing->add_option("--branches", timing_branches, "Comma-separated branch counts");
  timing->add_option("--iters", timing_iters, "Iterations per arm");
  timing->add_option("--out", timing_out, "Artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      config.out_dir = out_dir;
      return run_solve(instance_path, mode, config);
    }
    if (hydro->parsed()) {
      const HydroConfig cfg = load_hydro_config_file(hydro_config_path);
      const Instance inst = build_hydro_instance(cfg, hydro_branches);
      save_instance_file(inst, hydro_out);
      std::cout << "wrote " << hydro_out << "\n";
      return 0;
    }
    if (lip->parsed()) {
      lip_config.mode = RunMode::LipschitzStudy;
      lip_config.lp_tol = lp_tol_from_env(lip_config.lp_tol);
      lip_config.out_dir = lip_out;
      lip_config.lipschitz_factors.clear();
      std::stringstream ss(lip_factors);
      std::string tok;
      while (std::getline(ss, tok, ',')) lip_config.lipschitz_factors.push_back(std::stod(tok));
      const Instance inst = load_instance_file(lip_instance);
      const LipschitzStudyResult study = run_lipschitz_study(inst, lip_config);
      emit_lipschitz_csv(study, std::cout);
      if (!lip_out.empty()) {
        std::filesystem::create_directories(lip_out);
        std::ofstream out(lip_out + "/lipstudy.csv");
        emit_lipschitz_csv(study, out);
      }
      return 0;
    }
    if (timing->parsed()) {
      RunConfig base;
      base.lp_tol = lp_tol_from_env(base.lp_tol);
      base.log = &std::cout;
      std::vector<int> branches;
      std::stringstream ss(timing_branches);
      std::string tok;
      while (std::getline(ss, tok, ',')) branches.push_back(std::stoi(tok));
      const HydroConfig cfg = load_hydro_config_file(timing_config_path);
      const TimingReport report = timing_report(cfg, branches, timing_iters, base);
      emit_timing_csv(report, std::cout);
      if (!timing_out.empty()) {
        std::filesystem::create_directories(timing_out);
        std::ofstream out(timing_out + "/timing.csv");
        emit_timing_csv(report, out);
      }
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
