#include "dualsddp/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dualsddp/errors.hpp"

namespace dualsddp {

namespace {

constexpr double kCurtailFraction[4] = {0.05, 0.05, 0.10, 0.80};

void check_config(const HydroConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ValidationError("hydro config: " + msg); };
  if (cfg.horizon <= 0) fail("horizon must be positive");
  if (cfg.reservoirs.empty()) fail("at least one reservoir required");
  const int R = static_cast<int>(cfg.reservoirs.size());
  const int S = cfg.subsystems > 0 ? cfg.subsystems : R;
  if (S < R) fail("subsystem count below reservoir count");
  for (const HydroReservoir& r : cfg.reservoirs) {
    if (r.xmax < 0.0 || r.hmax < 0.0) fail("negative reservoir capacity");
    if (r.x0 < 0.0 || r.x0 > r.xmax) fail("initial storage outside [0, xmax]");
  }
  for (const HydroThermal& t : cfg.thermal) {
    if (t.subsystem < 0 || t.subsystem >= S) fail("thermal unit in unknown subsystem");
    if (t.gmax < 0.0) fail("negative thermal capacity");
    if (t.cost < 0.0) fail("negative thermal cost");
  }
  for (const HydroInterconnection& ic : cfg.interconnections) {
    if (ic.from < 0 || ic.from >= S || ic.to < 0 || ic.to >= S || ic.from == ic.to) {
      fail("interconnection endpoints invalid");
    }
    if (ic.capacity < 0.0) fail("negative interconnection capacity");
    if (ic.penalty < 0.0) fail("negative exchange penalty");
  }
  if (cfg.demand.empty()) fail("demand table missing");
  for (const Vec& row : cfg.demand) {
    if (static_cast<int>(row.size()) != S) fail("demand row length does not match subsystems");
    for (double v : row) {
      if (v < 0.0) fail("negative demand");
    }
  }
  if (cfg.inflows.empty()) fail("inflow scenarios missing");
  for (const auto& stage : cfg.inflows) {
    if (stage.empty()) fail("a stage has no inflow scenarios");
    for (const Vec& scen : stage) {
      if (static_cast<int>(scen.size()) != R) fail("inflow scenario length does not match reservoirs");
      for (double v : scen) {
        if (v < 0.0) fail("negative inflow");
      }
    }
  }
  if (cfg.curtailment_cost.size() != 4) fail("curtailment_costs must list CD_1..CD_4");
  double prev = 0.0;
  for (double v : cfg.curtailment_cost) {
    if (v < prev) fail("curtailment costs must be nondecreasing");
    prev = v;
  }
  if (cfg.spill_penalty < 0.0) fail("negative spill penalty");
  if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0) fail("risk alpha must lie in (0, 1]");
  if (cfg.beta < 0.0 || cfg.beta > 1.0) fail("risk beta must lie in [0, 1]");
  if (!cfg.scenario_probability.empty()) {
    double ps = 0.0;
    for (double v : cfg.scenario_probability) {
      if (v < 0.0) fail("negative scenario probability");
      ps += v;
    }
    if (std::fabs(ps - 1.0) > 1e-9) fail("scenario probabilities must sum to 1");
  }
}

// Deterministic resampling of a scenario pool to exactly n points: convex
// interpolation at evenly spaced positions along the pool.
std::vector<Vec> resample_pool(const std::vector<Vec>& pool, int n) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n));
  const int P = static_cast<int>(pool.size());
  for (int i = 0; i < n; ++i) {
    const double pos = n == 1 ? 0.5 * (P - 1) : static_cast<double>(i) * (P - 1) / (n - 1);
    const int lo = std::min(static_cast<int>(pos), P - 1);
    const int hi = std::min(lo + 1, P - 1);
    const double w = pos - lo;
    Vec v(pool[static_cast<std::size_t>(lo)].size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = (1.0 - w) * pool[static_cast<std::size_t>(lo)][k] +
             w * pool[static_cast<std::size_t>(hi)][k];
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

Instance build_hydro_instance(const HydroConfig& cfg, int branch_override) {
  check_config(cfg);
  const int T = cfg.horizon;
  const int R = static_cast<int>(cfg.reservoirs.size());
  const int S = cfg.subsystems > 0 ? cfg.subsystems : R;
  const int nthermal = static_cast<int>(cfg.thermal.size());
  const int nexchange = 2 * static_cast<int>(cfg.interconnections.size());
  const int m = S + R;

  // Control layout: hydro R | thermal | exchange (2 per interconnection) |
  // spill R | curtailment 4*S.
  const int off_hydro = 0;
  const int off_thermal = off_hydro + R;
  const int off_exchange = off_thermal + nthermal;
  const int off_spill = off_exchange + nexchange;
  const int off_curtail = off_spill + R;
  const int ny = off_curtail + 4 * S;

  double max_inflow = 0.0;
  for (const auto& stage : cfg.inflows) {
    for (const Vec& scen : stage) {
      for (double v : scen) max_inflow = std::max(max_inflow, v);
    }
  }

  Instance inst;
  inst.name = cfg.name;
  std::ostringstream desc;
  desc << R << " reservoirs, " << S << " subsystems, " << nthermal << " thermal units, T=" << T;
  inst.description = desc.str();
  inst.horizon = T;
  inst.x0.resize(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) inst.x0[static_cast<std::size_t>(r)] = cfg.reservoirs[static_cast<std::size_t>(r)].x0;

  for (int t = 0; t < T; ++t) {
    const Vec& dem = cfg.demand.size() == 1 ? cfg.demand[0]
                                            : cfg.demand[static_cast<std::size_t>(t)];
    if (cfg.demand.size() != 1 && static_cast<int>(cfg.demand.size()) != T) {
      throw ValidationError("hydro config: demand table must have 1 or horizon rows");
    }
    const auto& pool = cfg.inflows.size() == 1 ? cfg.inflows[0]
                                               : cfg.inflows[static_cast<std::size_t>(t)];
    if (cfg.inflows.size() != 1 && static_cast<int>(cfg.inflows.size()) != T) {
      throw ValidationError("hydro config: inflow table must have 1 or horizon entries");
    }
    std::vector<Vec> scenarios = branch_override > 0 ? resample_pool(pool, branch_override) : pool;
    Vec probs;
    if (branch_override == 0 && !cfg.scenario_probability.empty()) {
      if (cfg.scenario_probability.size() != scenarios.size()) {
        throw ValidationError("hydro config: scenario probabilities do not match scenario count");
      }
      probs = cfg.scenario_probability;
    } else {
      probs.assign(scenarios.size(), 1.0 / static_cast<double>(scenarios.size()));
    }

    Stage st;
    st.xbar.resize(static_cast<std::size_t>(R));
    for (int r = 0; r < R; ++r) st.xbar[static_cast<std::size_t>(r)] = cfg.reservoirs[static_cast<std::size_t>(r)].xmax;

    st.ybar.assign(static_cast<std::size_t>(ny), 0.0);
    Vec cost(static_cast<std::size_t>(ny), 0.0);
    for (int r = 0; r < R; ++r) {
      st.ybar[static_cast<std::size_t>(off_hydro + r)] = cfg.reservoirs[static_cast<std::size_t>(r)].hmax;
      st.ybar[static_cast<std::size_t>(off_spill + r)] =
          cfg.reservoirs[static_cast<std::size_t>(r)].xmax + max_inflow;
      cost[static_cast<std::size_t>(off_spill + r)] = cfg.spill_penalty;
    }
    for (int u = 0; u < nthermal; ++u) {
      st.ybar[static_cast<std::size_t>(off_thermal + u)] = cfg.thermal[static_cast<std::size_t>(u)].gmax;
      cost[static_cast<std::size_t>(off_thermal + u)] = cfg.thermal[static_cast<std::size_t>(u)].cost;
    }
    for (std::size_t ic = 0; ic < cfg.interconnections.size(); ++ic) {
      const HydroInterconnection& link = cfg.interconnections[ic];
      st.ybar[static_cast<std::size_t>(off_exchange) + 2 * ic] = link.capacity;
      st.ybar[static_cast<std::size_t>(off_exchange) + 2 * ic + 1] = link.capacity;
      cost[static_cast<std::size_t>(off_exchange) + 2 * ic] = link.penalty;
      cost[static_cast<std::size_t>(off_exchange) + 2 * ic + 1] = link.penalty;
    }
    for (int s = 0; s < S; ++s) {
      for (int k = 0; k < 4; ++k) {
        st.ybar[static_cast<std::size_t>(off_curtail + 4 * s + k)] =
            kCurtailFraction[k] * dem[static_cast<std::size_t>(s)];
        cost[static_cast<std::size_t>(off_curtail + 4 * s + k)] =
            cfg.curtailment_cost[static_cast<std::size_t>(k)];
      }
    }

    st.risk.type = RiskSpec::Type::MeanAvar;
    st.risk.alpha = cfg.alpha;
    st.risk.beta = cfg.beta;

    for (std::size_t j = 0; j < scenarios.size(); ++j) {
      StageRealization real;
      real.probability = probs[j];
      real.A = SparseMatrix(m, R);
      real.B = SparseMatrix(m, R);
      real.T = SparseMatrix(m, ny);
      real.d.assign(static_cast<std::size_t>(m), 0.0);
      real.c = cost;

      // Demand balance per subsystem (rows 0..S-1):
      //   hydro + thermal + curtailment + imports - exports = demand.
      for (int s = 0; s < S; ++s) {
        if (s < R) real.T.add(s, off_hydro + s, 1.0);
        for (int k = 0; k < 4; ++k) real.T.add(s, off_curtail + 4 * s + k, 1.0);
        real.d[static_cast<std::size_t>(s)] = dem[static_cast<std::size_t>(s)];
      }
      for (int u = 0; u < nthermal; ++u) {
        real.T.add(cfg.thermal[static_cast<std::size_t>(u)].subsystem, off_thermal + u, 1.0);
      }
      for (std::size_t ic = 0; ic < cfg.interconnections.size(); ++ic) {
        const HydroInterconnection& link = cfg.interconnections[ic];
        const int fwd = off_exchange + 2 * static_cast<int>(ic);
        real.T.add(link.to, fwd, 1.0);
        real.T.add(link.from, fwd, -1.0);
        real.T.add(link.from, fwd + 1, 1.0);
        real.T.add(link.to, fwd + 1, -1.0);
      }

      // Storage dynamics per reservoir (rows S..S+R-1):
      //   x_r - x_r_prev + h_r + spill_r = inflow_r.
      for (int r = 0; r < R; ++r) {
        const int row = S + r;
        real.A.add(row, r, 1.0);
        real.B.add(row, r, -1.0);
        real.T.add(row, off_hydro + r, 1.0);
        real.T.add(row, off_spill + r, 1.0);
        real.d[static_cast<std::size_t>(row)] = scenarios[j][static_cast<std::size_t>(r)];
      }
      st.realizations.push_back(std::move(real));
    }
    inst.stages.push_back(std::move(st));
  }

  const std::vector<Vec> lips = estimate_lipschitz(inst);
  for (int t = 0; t < T; ++t) inst.stages[static_cast<std::size_t>(t)].lipschitz = lips[static_cast<std::size_t>(t)];
  return inst;
}

namespace {

using json = nlohmann::json;

double num_field(const json& j, const char* key, double fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw SchemaError(std::string("hydro config: missing field '") + key + "'");
    return fallback;
  }
  if (!j[key].is_number()) throw SchemaError(std::string("hydro config: '") + key + "' must be a number");
  return j[key].get<double>();
}

}  // namespace

HydroConfig parse_hydro_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  HydroConfig cfg;
  if (root.contains("name")) cfg.name = root["name"].get<std::string>();
  cfg.horizon = static_cast<int>(num_field(root, "horizon", 0, true));
  cfg.subsystems = static_cast<int>(num_field(root, "subsystems", 0));
  if (!root.contains("reservoirs") || !root["reservoirs"].is_array()) {
    throw SchemaError("hydro config: missing reservoir list");
  }
  for (const json& jr : root["reservoirs"]) {
    HydroReservoir r;
    r.xmax = num_field(jr, "xmax", 0, true);
    r.hmax = num_field(jr, "hmax", 0, true);
    r.x0 = num_field(jr, "x0", 0, true);
    cfg.reservoirs.push_back(r);
  }
  if (root.contains("thermal")) {
    for (const json& jt : root["thermal"]) {
      HydroThermal t;
      t.subsystem = static_cast<int>(num_field(jt, "subsystem", 0));
      t.gmax = num_field(jt, "gmax", 0, true);
      t.cost = num_field(jt, "cost", 0, true);
      cfg.thermal.push_back(t);
    }
  }
  if (root.contains("interconnections")) {
    for (const json& ji : root["interconnections"]) {
      HydroInterconnection ic;
      ic.from = static_cast<int>(num_field(ji, "from", 0, true));
      ic.to = static_cast<int>(num_field(ji, "to", 0, true));
      ic.capacity = num_field(ji, "capacity", 0, true);
      ic.penalty = num_field(ji, "penalty", 0);
      cfg.interconnections.push_back(ic);
    }
  }
  if (!root.contains("demand")) throw SchemaError("hydro config: missing demand");
  {
    const json& jd = root["demand"];
    if (!jd.is_array() || jd.empty()) throw SchemaError("hydro config: demand must be a nonempty array");
    if (jd[0].is_number()) {
      cfg.demand.push_back(jd.get<Vec>());
    } else {
      for (const json& row : jd) cfg.demand.push_back(row.get<Vec>());
    }
  }
  if (!root.contains("inflows")) throw SchemaError("hydro config: missing inflows");
  {
    const json& ji = root["inflows"];
    if (!ji.is_array() || ji.empty()) throw SchemaError("hydro config: inflows must be a nonempty array");
    // [scenario][reservoir] broadcasts across stages; [stage][scenario][reservoir] is explicit.
    if (ji[0].is_array() && !ji[0].empty() && ji[0][0].is_number()) {
      std::vector<Vec> pool;
      for (const json& s : ji) pool.push_back(s.get<Vec>());
      cfg.inflows.push_back(std::move(pool));
    } else {
      for (const json& jstage : ji) {
        std::vector<Vec> pool;
        for (const json& s : jstage) pool.push_back(s.get<Vec>());
        cfg.inflows.push_back(std::move(pool));
      }
    }
  }
  if (root.contains("probabilities")) cfg.scenario_probability = root["probabilities"].get<Vec>();
  if (!root.contains("curtailment_costs")) throw SchemaError("hydro config: missing curtailment_costs");
  cfg.curtailment_cost = root["curtailment_costs"].get<Vec>();
  cfg.spill_penalty = num_field(root, "spill_penalty", 0.0);
  if (root.contains("risk")) {
    cfg.alpha = num_field(root["risk"], "alpha", 1.0);
    cfg.beta = num_field(root["risk"], "beta", 1.0);
  }
  return cfg;
}

HydroConfig load_hydro_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hydro config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_hydro_config_json(buf.str());
}

}  // namespace dualsddp
