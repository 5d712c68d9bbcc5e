#pragma once

#include <string>
#include <vector>

#include "dualsddp/model.hpp"

namespace dualsddp {

struct HydroReservoir {
  double xmax = 0.0;  // storage capacity (energy equivalent)
  double hmax = 0.0;  // hydro generation capacity
  double x0 = 0.0;    // initial storage
};

struct HydroThermal {
  int subsystem = 0;
  double gmax = 0.0;
  double cost = 0.0;
};

struct HydroInterconnection {
  int from = 0;
  int to = 0;
  double capacity = 0.0;
  double penalty = 0.0;  // applied to each direction
};

/// Aggregated hydrothermal system: one reservoir per subsystem index
/// 0..R-1; subsystems R..S-1 are demand/interconnection nodes without
/// storage. Each stage has one demand-balance row per subsystem and one
/// storage-dynamics row per reservoir.
struct HydroConfig {
  std::string name = "hydro";
  int horizon = 0;
  int subsystems = 0;  // 0 means "one per reservoir"
  std::vector<HydroReservoir> reservoirs;
  std::vector<HydroThermal> thermal;
  std::vector<HydroInterconnection> interconnections;  // each entry creates both directions
  std::vector<Vec> demand;                 // [stage][subsystem]; a single row broadcasts
  std::vector<std::vector<Vec>> inflows;   // [stage][scenario][reservoir]; one stage broadcasts
  Vec scenario_probability;                // optional; uniform when empty
  Vec curtailment_cost;                    // CD_1..CD_4, nondecreasing
  double spill_penalty = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
};

/// Builds the stagewise instance: demand balance with four curtailment
/// ranges (5/5/10/80% of demand), storage dynamics with inflow folded into
/// the right-hand side and spillage as an explicit control, exchange and
/// spill penalties in the stage cost. The state is the vector of stored
/// energies. Rejects negative demands and capacities.
///
/// branch_override > 0 regenerates each stage's scenario set to exactly
/// that many branches by deterministic interpolation over the configured
/// pool, with uniform probabilities.
Instance build_hydro_instance(const HydroConfig& config, int branch_override = 0);

HydroConfig parse_hydro_config_json(const std::string& text);
HydroConfig load_hydro_config_file(const std::string& path);

}  // namespace dualsddp
