#pragma once

#include <variant>
#include <vector>

#include "dualsddp/lp.hpp"
#include "dualsddp/sparse.hpp"

namespace dualsddp {

/// Polyhedral risk envelope: a polytope Q of probability vectors over J
/// outcomes with rho[theta] = sup_{q in Q} q^T theta.
///
/// Two representations:
///  - vertex: Q = conv({q^k}), each q^k a probability vector;
///  - mean_avar_box: Q = { q : q_j = p_j (beta + delta_j),
///      sum_j p_j delta_j = 1 - beta, 0 <= delta_j <= (1 - beta) / alpha },
///    the envelope of beta * E + (1 - beta) * AV@R_alpha under reference
///    probabilities p.
class RiskEnvelope {
 public:
  enum class Kind { Vertex, MeanAvarBox };

  static RiskEnvelope mean_avar(Vec reference_p, double alpha, double beta);
  static RiskEnvelope from_vertices(std::vector<Vec> vertices);

  Kind kind() const { return kind_; }
  int num_outcomes() const { return J_; }
  const Vec& reference_p() const { return p_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  const std::vector<Vec>& vertices() const { return vertices_; }

 private:
  RiskEnvelope() = default;
  Kind kind_ = Kind::Vertex;
  int J_ = 0;
  Vec p_;                       // mean_avar_box only
  double alpha_ = 1.0, beta_ = 1.0;
  std::vector<Vec> vertices_;   // vertex form only
};

/// Scaled envelope membership: a vector gamma with mass gamma_total such
/// that gamma lies in gamma_total * Q. Since Q sits inside the simplex,
/// sum_j gamma_j = gamma_total.
struct ChangeOfMeasure {
  Vec gamma;
  double total = 0.0;
};

/// AV@R_alpha[theta]: mean of the worst alpha-fraction of outcomes, the
/// exact minimum of the Rockafellar-Uryasev objective
/// min_q q + E[(theta - q)^+] / alpha. Rejects alpha outside (0, 1].
double avar(const Vec& theta, const Vec& p, double alpha);

/// beta * E[theta] + (1 - beta) * AV@R_alpha[theta].
double rho_mean_avar(const Vec& theta, const Vec& p, double alpha, double beta);

/// Row/variable ids created by emit_envelope_constraints.
struct EnvelopeEmission {
  int mass_row = -1;          // the single row carrying gamma_total (scalar form)
  int gamma_scale_var = -1;   // internal mass variable (scalar form only)
  std::vector<int> aux_vars;  // delta' (box form) or Phi (vertex form)
  std::vector<int> rows;      // every emitted row id
};

/// Emits the linear block constraining (gamma_1..gamma_J) to gamma_total * Q
/// onto an LP under construction. gamma_total is either a fixed scalar or an
/// existing variable id (std::variant). In the scalar form an internal mass
/// variable is linked by exactly one row "mass_row" so that gamma_total
/// appears in a single row; every other emitted row is homogeneous. The
/// feasible set of gamma equals gamma_total * Q exactly.
EnvelopeEmission emit_envelope_constraints(LinearProgram& lp, const RiskEnvelope& env,
                                           const std::vector<int>& gamma_vars,
                                           std::variant<double, int> gamma_total,
                                           const std::string& tag);

/// Exact vertex set of Q, deduplicated within 1e-10. Exponential in J for
/// the box form; guarded by max_outcomes.
std::vector<Vec> envelope_vertices(const RiskEnvelope& env, int max_outcomes = 16);

/// max_{q in Q} q^T theta, computed by LP over emit_envelope_constraints
/// with gamma_total = 1.
double rho_via_envelope(const Vec& theta, const RiskEnvelope& env, double lp_tol = 1e-9);

/// Exact membership test for gamma in gamma_total * Q (LP feasibility).
bool in_envelope(const RiskEnvelope& env, const Vec& gamma, double gamma_total, double tol = 1e-8);

}  // namespace dualsddp
