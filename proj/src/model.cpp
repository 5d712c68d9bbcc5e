#include "dualsddp/model.hpp"

#include <cmath>
#include <sstream>

#include "dualsddp/errors.hpp"

namespace dualsddp {

RiskEnvelope Stage::envelope() const {
  if (risk.type == RiskSpec::Type::Polyhedral) {
    return RiskEnvelope::from_vertices(risk.vertices);
  }
  Vec p;
  p.reserve(realizations.size());
  for (const StageRealization& r : realizations) p.push_back(r.probability);
  return RiskEnvelope::mean_avar(std::move(p), risk.alpha, risk.beta);
}

std::vector<std::string> validate_instance(const Instance& inst) {
  std::vector<std::string> report;
  auto fail = [&](const std::string& msg) { report.push_back(msg); };

  if (inst.horizon != static_cast<int>(inst.stages.size())) {
    fail("horizon " + std::to_string(inst.horizon) + " does not match stage count " +
         std::to_string(inst.stages.size()));
  }
  if (inst.stages.empty()) {
    fail("instance has no stages");
    return report;
  }

  int prev_dim = static_cast<int>(inst.x0.size());
  for (double v : inst.x0) {
    if (!std::isfinite(v) || v < 0.0) fail("x0 has a negative or non-finite entry");
  }

  for (std::size_t s = 0; s < inst.stages.size(); ++s) {
    const Stage& st = inst.stages[s];
    const std::string where = "stage " + std::to_string(s + 1);
    if (st.realizations.empty()) {
      fail(where + ": no realizations");
      continue;
    }
    const int nx = st.state_dim();
    const int ny = st.control_dim();
    const int m = static_cast<int>(st.realizations.front().d.size());

    double psum = 0.0;
    for (std::size_t j = 0; j < st.realizations.size(); ++j) {
      const StageRealization& r = st.realizations[j];
      const std::string rw = where + ", realization " + std::to_string(j);
      if (r.probability < 0.0) fail(rw + ": negative probability");
      psum += r.probability;
      if (static_cast<int>(r.d.size()) != m) fail(rw + ": d length differs across realizations");
      if (static_cast<int>(r.c.size()) != ny) {
        fail(rw + ": cost length " + std::to_string(r.c.size()) + " does not match ybar length " +
             std::to_string(ny));
      }
      if (r.A.rows != m || r.A.cols != nx) fail(rw + ": A dimensions inconsistent");
      if (r.B.rows != m || r.B.cols != prev_dim) {
        fail(rw + ": B column count " + std::to_string(r.B.cols) +
             " does not match previous state dimension " + std::to_string(prev_dim));
      }
      if (r.T.rows != m || r.T.cols != ny) fail(rw + ": T dimensions inconsistent");
      if (!r.A.indices_in_range() || !r.B.indices_in_range() || !r.T.indices_in_range()) {
        fail(rw + ": triplet index out of range");
      }
    }
    if (std::fabs(psum - 1.0) > 1e-9) {
      std::ostringstream os;
      os << where << ": probabilities sum to " << psum;
      fail(os.str());
    }

    for (double v : st.xbar) {
      if (!std::isfinite(v) || v < 0.0) fail(where + ": xbar must be finite and nonnegative");
    }
    for (double v : st.ybar) {
      if (!std::isfinite(v) || v < 0.0) fail(where + ": ybar must be finite and nonnegative");
    }
    if (static_cast<int>(st.lipschitz.size()) != prev_dim) {
      fail(where + ": lipschitz length " + std::to_string(st.lipschitz.size()) +
           " does not match incoming state dimension " + std::to_string(prev_dim));
    }
    for (double v : st.lipschitz) {
      if (!std::isfinite(v) || v < 0.0) fail(where + ": lipschitz must be finite and nonnegative");
    }

    bool has_negative_cost = false;
    for (const StageRealization& r : st.realizations) {
      for (double v : r.c) {
        if (v < 0.0) has_negative_cost = true;
      }
    }
    if (has_negative_cost && !st.value_floor.has_value()) {
      fail(where + ": negative stage costs require an explicit value_floor");
    }

    if (st.risk.type == RiskSpec::Type::MeanAvar) {
      if (!(st.risk.alpha > 0.0) || st.risk.alpha > 1.0) {
        fail(where + ": risk alpha must lie in (0, 1]");
      }
      if (st.risk.beta < 0.0 || st.risk.beta > 1.0) fail(where + ": risk beta must lie in [0, 1]");
    } else {
      if (st.risk.vertices.empty()) fail(where + ": polyhedral risk needs at least one vertex");
      for (const Vec& q : st.risk.vertices) {
        if (static_cast<int>(q.size()) != st.num_realizations()) {
          fail(where + ": risk vertex length does not match realization count");
          continue;
        }
        double qs = 0.0;
        for (double v : q) {
          if (v < -1e-12) fail(where + ": risk vertex has a negative entry");
          qs += v;
        }
        if (std::fabs(qs - 1.0) > 1e-9) fail(where + ": risk vertex does not sum to 1");
      }
    }
    prev_dim = nx;
  }
  return report;
}

std::vector<TreeNode> enumerate_tree(const Instance& inst, int t_max, long node_budget) {
  if (t_max < 0 || t_max > inst.horizon) {
    throw Error("enumerate_tree: t_max out of range");
  }
  long count = 1;
  long product = 1;
  for (int s = 0; s < t_max; ++s) {
    product *= inst.stage(s).num_realizations();
    count += product;
    if (count > node_budget) {
      std::ostringstream os;
      os << "enumerate_tree: node budget " << node_budget << " exceeded (depth " << s + 1
         << " already needs " << count << " nodes; realization product " << product << ")";
      throw BudgetError(os.str());
    }
  }

  std::vector<TreeNode> nodes;
  nodes.reserve(static_cast<std::size_t>(count));
  nodes.push_back({0, 0, -1, -1, 1.0});
  std::size_t level_begin = 0;
  std::size_t level_end = 1;
  for (int depth = 1; depth <= t_max; ++depth) {
    const Stage& st = inst.stage(depth - 1);
    for (std::size_t pi = level_begin; pi < level_end; ++pi) {
      for (int j = 0; j < st.num_realizations(); ++j) {
        TreeNode n;
        n.id = static_cast<int>(nodes.size());
        n.depth = depth;
        n.parent = nodes[pi].id;
        n.realization = j;
        n.path_probability =
            nodes[pi].path_probability * st.realizations[static_cast<std::size_t>(j)].probability;
        nodes.push_back(n);
      }
    }
    level_begin = level_end;
    level_end = nodes.size();
  }
  return nodes;
}

std::vector<Vec> estimate_lipschitz(const Instance& inst) {
  double max_cost = 0.0;
  for (const Stage& st : inst.stages) {
    for (const StageRealization& r : st.realizations) {
      for (double v : r.c) max_cost = std::max(max_cost, std::fabs(v));
    }
  }
  std::vector<Vec> out;
  out.reserve(inst.stages.size());
  int prev_dim = static_cast<int>(inst.x0.size());
  for (int s = 0; s < inst.horizon; ++s) {
    const double L = max_cost * static_cast<double>(inst.horizon - s);
    out.emplace_back(static_cast<std::size_t>(prev_dim), L);
    prev_dim = inst.stage(s).state_dim();
  }
  return out;
}

}  // namespace dualsddp
