#include "dualsddp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dualsddp/errors.hpp"
#include "dualsddp/sparse.hpp"

namespace dualsddp {

namespace {

enum class VStat : unsigned char { Basic, AtLower, AtUpper, Free };

// Two-phase bounded-variable revised simplex with a dense, column-major
// basis inverse. Computational variables are laid out as
//   [0, n)        structurals
//   [n, n+m)      slacks, one per row (row sense encoded in the slack bounds)
//   [n+m, n+2m)   artificials, basic at phase-1 start
// so the initial basis is the identity and every slack or artificial column
// is a singleton.
class SimplexCore {
 public:
  SimplexCore(const LinearProgram& lp, const SimplexOptions& opt) : opt_(opt) { build(lp); }

  LpSolution solve() {
    // Phase 1: minimize total artificial infeasibility.
    phase_ = 1;
    set_phase_costs();
    RunOutcome out = run();
    if (out == RunOutcome::Unbounded) {
      throw SolverError("simplex: phase-1 objective unbounded (numerical failure)");
    }
    const double feas_cut = opt_.tol * (1.0 + b_norm1_);
    if (artificial_infeasibility() > feas_cut) {
      // Confirm on a fresh factorization before declaring infeasibility.
      if (pivots_since_refactor_ > 0) {
        refactor_or_throw();
        if (run() == RunOutcome::Unbounded) {
          throw SolverError("simplex: phase-1 objective unbounded (numerical failure)");
        }
      }
      if (artificial_infeasibility() > feas_cut) {
        LpSolution sol;
        sol.status = SolveStatus::Infeasible;
        return sol;
      }
    }

    // Phase 2: lock artificials at zero and optimize the true objective.
    phase_ = 2;
    for (int a = n_ + m_; a < total_; ++a) {
      lb_[a] = 0.0;
      ub_[a] = 0.0;
    }
    set_phase_costs();

    for (int attempt = 0;; ++attempt) {
      out = run();
      if (out == RunOutcome::Unbounded) {
        if (pivots_since_refactor_ > 0) {
          refactor_or_throw();
          continue;  // re-derive the ray with fresh numbers
        }
        LpSolution sol;
        sol.status = SolveStatus::Unbounded;
        return sol;
      }
      if (verify_optimal()) break;
      if (attempt >= 3) {
        throw SolverError("simplex: optimality tolerances not met after refactorization");
      }
      refactor_or_throw();
    }
    return extract_solution();
  }

 private:
  enum class RunOutcome { Optimal, Unbounded };

  void build(const LinearProgram& lp) {
    n_ = lp.num_vars();
    m_ = lp.num_rows();
    total_ = n_ + 2 * m_;
    maximize_ = lp.sense() == ObjSense::Maximize;

    lb_.assign(total_, 0.0);
    ub_.assign(total_, 0.0);
    cost2_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) {
      const Variable& v = lp.var(j);
      if (!(v.lower <= v.upper)) {
        throw Error("simplex: variable '" + v.name + "' has lower > upper");
      }
      lb_[j] = v.lower;
      ub_[j] = v.upper;
      cost2_[j] = maximize_ ? -v.cost : v.cost;
    }

    b_.assign(m_, 0.0);
    b_norm1_ = 0.0;
    for (int i = 0; i < m_; ++i) {
      const Row& r = lp.row(i);
      b_[i] = r.rhs;
      b_norm1_ += std::fabs(r.rhs);
      const int s = n_ + i;
      switch (r.sense) {
        case RowSense::Equal:
          lb_[s] = 0.0;
          ub_[s] = 0.0;
          break;
        case RowSense::LessEqual:
          lb_[s] = 0.0;
          ub_[s] = kInf;
          break;
        case RowSense::GreaterEqual:
          lb_[s] = -kInf;
          ub_[s] = 0.0;
          break;
      }
    }

    // Structural columns, CSC; duplicate (row, col) entries are additive.
    std::vector<int> count(n_ + 1, 0);
    std::size_t nnz = 0;
    for (int i = 0; i < m_; ++i) {
      for (const auto& [j, v] : lp.row(i).coeffs) {
        (void)v;
        ++count[j + 1];
        ++nnz;
      }
    }
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j + 1];
    col_row_.resize(nnz);
    col_val_.resize(nnz);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i) {
      for (const auto& [j, v] : lp.row(i).coeffs) {
        col_row_[static_cast<std::size_t>(fill[j])] = i;
        col_val_[static_cast<std::size_t>(fill[j])] = v;
        ++fill[j];
      }
    }

    // Initial point: structurals and slacks nonbasic, artificials basic.
    stat_.assign(total_, VStat::AtLower);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lb_[j])) {
        stat_[j] = VStat::AtLower;
      } else if (std::isfinite(ub_[j])) {
        stat_[j] = VStat::AtUpper;
      } else {
        stat_[j] = VStat::Free;
      }
    }
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      stat_[s] = std::isfinite(lb_[s]) ? VStat::AtLower : VStat::AtUpper;  // value 0 either way
    }

    Vec resid = b_;
    for (int j = 0; j < n_; ++j) {
      const double v = nonbasic_value(j);
      if (v != 0.0) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
          resid[col_row_[static_cast<std::size_t>(k)]] -= col_val_[static_cast<std::size_t>(k)] * v;
        }
      }
    }

    basis_.resize(m_);
    xB_.assign(m_, 0.0);
    cB_.assign(m_, 0.0);
    cost1_.assign(total_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const int a = n_ + m_ + i;
      basis_[i] = a;
      stat_[a] = VStat::Basic;
      xB_[i] = resid[i];
      if (resid[i] >= 0.0) {
        lb_[a] = 0.0;
        ub_[a] = kInf;
        cost1_[a] = 1.0;
      } else {
        lb_[a] = -kInf;
        ub_[a] = 0.0;
        cost1_[a] = -1.0;
      }
    }

    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
  }

  double nonbasic_value(int j) const {
    switch (stat_[j]) {
      case VStat::AtLower:
        return lb_[j];
      case VStat::AtUpper:
        return ub_[j];
      default:
        return 0.0;
    }
  }

  void set_phase_costs() {
    const Vec& c = phase_ == 1 ? cost1_ : cost2_;
    for (int i = 0; i < m_; ++i) cB_[i] = c[basis_[i]];
  }

  double current_cost(int j) const { return phase_ == 1 ? cost1_[j] : cost2_[j]; }

  double artificial_infeasibility() const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] >= n_ + m_) s += std::fabs(xB_[i]);
    }
    return s;
  }

  // y^T = cB^T B^{-1}; with a column-major inverse each y_i is one contiguous dot.
  void btran(Vec& y) const {
    y.assign(static_cast<std::size_t>(m_), 0.0);
    for (int i = 0; i < m_; ++i) {
      const double* col = &binv_[static_cast<std::size_t>(i) * m_];
      double s = 0.0;
      for (int k = 0; k < m_; ++k) s += cB_[k] * col[k];
      y[i] = s;
    }
  }

  // w = B^{-1} a_q, expanded over the nonzeros of column q.
  void ftran(int q, Vec& w) const {
    w.assign(static_cast<std::size_t>(m_), 0.0);
    if (q < n_) {
      for (int k = col_start_[q]; k < col_start_[q + 1]; ++k) {
        const double a = col_val_[static_cast<std::size_t>(k)];
        const double* col = &binv_[static_cast<std::size_t>(col_row_[static_cast<std::size_t>(k)]) * m_];
        for (int i = 0; i < m_; ++i) w[i] += a * col[i];
      }
    } else {
      const int r = q < n_ + m_ ? q - n_ : q - n_ - m_;
      const double* col = &binv_[static_cast<std::size_t>(r) * m_];
      for (int i = 0; i < m_; ++i) w[i] = col[i];
    }
  }

  double column_dot(int j, const Vec& y) const {
    if (j < n_) {
      double s = 0.0;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        s += col_val_[static_cast<std::size_t>(k)] * y[col_row_[static_cast<std::size_t>(k)]];
      }
      return s;
    }
    const int r = j < n_ + m_ ? j - n_ : j - n_ - m_;
    return y[r];
  }

  bool movable(int j) const {
    if (stat_[j] == VStat::Basic) return false;
    if (lb_[j] == ub_[j]) return false;  // fixed (includes locked artificials)
    if (phase_ == 2 && j >= n_ + m_) return false;
    return true;
  }

  // Returns the entering variable, or -1 when the current point prices out.
  int price(const Vec& y, bool bland) const {
    int best = -1;
    double best_viol = opt_.tol;
    for (int j = 0; j < total_; ++j) {
      if (!movable(j)) continue;
      const double d = current_cost(j) - column_dot(j, y);
      double viol = 0.0;
      switch (stat_[j]) {
        case VStat::AtLower:
          viol = -d;
          break;
        case VStat::AtUpper:
          viol = d;
          break;
        case VStat::Free:
          viol = std::fabs(d);
          break;
        default:
          break;
      }
      if (viol > best_viol) {
        if (bland) return j;  // Bland: first eligible index
        best_viol = viol;
        best = j;
      }
    }
    return best;
  }

  RunOutcome run() {
    Vec y, w;
    int degenerate_streak = 0;
    for (;;) {
      if (pivots_total_ >= opt_.max_pivots) {
        throw SolverError("simplex: pivot limit reached");
      }
      if (pivots_since_refactor_ >= opt_.refactor_interval) {
        refactor_or_throw();
      }
      const bool bland = degenerate_streak > opt_.bland_threshold;
      btran(y);
      const int q = price(y, bland);
      if (q < 0) return RunOutcome::Optimal;

      const double dq = current_cost(q) - column_dot(q, y);
      double sigma;
      switch (stat_[q]) {
        case VStat::AtLower:
          sigma = 1.0;
          break;
        case VStat::AtUpper:
          sigma = -1.0;
          break;
        default:
          sigma = dq < 0.0 ? 1.0 : -1.0;
          break;
      }

      ftran(q, w);

      // Two-pass (Harris) ratio test: the first pass finds the tightest step
      // allowing a small bound overshoot, the second picks the largest pivot
      // among rows blocking within that relaxed step. In Bland mode the
      // second pass instead takes the smallest variable index at the exact
      // minimum ratio.
      constexpr double piv_tol = 1e-9;
      const double overshoot = opt_.tol;
      double relaxed_step = kInf;
      for (int i = 0; i < m_; ++i) {
        const double wi = w[i];
        if (std::fabs(wi) <= piv_tol) continue;
        const double rate = -sigma * wi;
        const int bj = basis_[i];
        if (rate > 0.0) {
          if (!std::isfinite(ub_[bj])) continue;
          relaxed_step = std::min(relaxed_step, (ub_[bj] - xB_[i] + overshoot) / rate);
        } else {
          if (!std::isfinite(lb_[bj])) continue;
          relaxed_step = std::min(relaxed_step, (xB_[i] - lb_[bj] + overshoot) / (-rate));
        }
      }

      double best_step = kInf;
      int leave = -1;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double wi = w[i];
        if (std::fabs(wi) <= piv_tol) continue;
        const double rate = -sigma * wi;
        const int bj = basis_[i];
        double step;
        bool to_upper;
        if (rate > 0.0) {
          if (!std::isfinite(ub_[bj])) continue;
          step = (ub_[bj] - xB_[i]) / rate;
          to_upper = true;
        } else {
          if (!std::isfinite(lb_[bj])) continue;
          step = (xB_[i] - lb_[bj]) / (-rate);
          to_upper = false;
        }
        if (step < 0.0) step = 0.0;
        if (step > relaxed_step) continue;
        bool better = false;
        if (leave < 0) {
          better = true;
        } else if (bland) {
          better = step < best_step - 1e-12 || (step <= best_step + 1e-12 && bj < basis_[leave]);
        } else {
          better = std::fabs(wi) > std::fabs(leave_pivot);
        }
        if (better) {
          best_step = std::min(best_step, step);
          leave = i;
          leave_to_upper = to_upper;
          leave_pivot = wi;
        }
      }

      double self_span = kInf;
      if (std::isfinite(lb_[q]) && std::isfinite(ub_[q])) self_span = ub_[q] - lb_[q];

      if (leave < 0 && !std::isfinite(self_span)) {
        return RunOutcome::Unbounded;
      }

      ++pivots_total_;
      if (self_span <= best_step) {
        // Bound flip: no basis change.
        for (int i = 0; i < m_; ++i) xB_[i] -= sigma * self_span * w[i];
        stat_[q] = stat_[q] == VStat::AtLower ? VStat::AtUpper : VStat::AtLower;
        degenerate_streak = self_span <= 1e-12 ? degenerate_streak + 1 : 0;
        continue;
      }

      const double step = best_step;
      const double enter_value = nonbasic_value(q) + sigma * step;
      for (int i = 0; i < m_; ++i) xB_[i] -= sigma * step * w[i];

      const int lj = basis_[leave];
      stat_[lj] = leave_to_upper ? VStat::AtUpper : VStat::AtLower;
      xB_[leave] = enter_value;
      basis_[leave] = q;
      stat_[q] = VStat::Basic;
      cB_[leave] = current_cost(q);
      update_binv(w, leave);

      degenerate_streak = step <= 1e-12 ? degenerate_streak + 1 : 0;
      ++pivots_since_refactor_;
    }
  }

  // binv <- E binv with E the elementary transform for pivot row r.
  void update_binv(const Vec& w, int r) {
    const double wr = w[r];
    eta_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int k = 0; k < m_; ++k) eta_[k] = -w[k] / wr;
    eta_[r] = 1.0 / wr;
    for (int c = 0; c < m_; ++c) {
      double* col = &binv_[static_cast<std::size_t>(c) * m_];
      const double t = col[r];
      if (t == 0.0) continue;
      for (int k = 0; k < m_; ++k) col[k] += t * eta_[k];
      col[r] = t * eta_[r];
    }
  }

  void refactor_or_throw() {
    const std::size_t mcols = static_cast<std::size_t>(m_);
    Vec a(mcols * mcols, 0.0);  // column-major basis matrix
    for (int c = 0; c < m_; ++c) {
      const int j = basis_[c];
      if (j < n_) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
          a[static_cast<std::size_t>(c) * m_ + col_row_[static_cast<std::size_t>(k)]] +=
              col_val_[static_cast<std::size_t>(k)];
        }
      } else {
        const int r = j < n_ + m_ ? j - n_ : j - n_ - m_;
        a[static_cast<std::size_t>(c) * m_ + r] += 1.0;
      }
    }
    Vec inv(mcols * mcols, 0.0);
    for (int i = 0; i < m_; ++i) inv[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    // Gauss-Jordan with partial pivoting; row operations on column-major data.
    for (int k = 0; k < m_; ++k) {
      int piv = -1;
      double best = 0.0;
      for (int i = k; i < m_; ++i) {
        const double v = std::fabs(a[static_cast<std::size_t>(k) * m_ + i]);
        if (v > best) {
          best = v;
          piv = i;
        }
      }
      if (piv < 0 || best < 1e-13) {
        throw SolverError("simplex: singular basis during refactorization");
      }
      if (piv != k) {
        for (int c = 0; c < m_; ++c) {
          std::swap(a[static_cast<std::size_t>(c) * m_ + k], a[static_cast<std::size_t>(c) * m_ + piv]);
          std::swap(inv[static_cast<std::size_t>(c) * m_ + k],
                    inv[static_cast<std::size_t>(c) * m_ + piv]);
        }
      }
      const double pivval = a[static_cast<std::size_t>(k) * m_ + k];
      for (int c = 0; c < m_; ++c) {
        a[static_cast<std::size_t>(c) * m_ + k] /= pivval;
        inv[static_cast<std::size_t>(c) * m_ + k] /= pivval;
      }
      for (int i = 0; i < m_; ++i) {
        if (i == k) continue;
        const double f = a[static_cast<std::size_t>(k) * m_ + i];
        if (f == 0.0) continue;
        for (int c = 0; c < m_; ++c) {
          a[static_cast<std::size_t>(c) * m_ + i] -= f * a[static_cast<std::size_t>(c) * m_ + k];
          inv[static_cast<std::size_t>(c) * m_ + i] -= f * inv[static_cast<std::size_t>(c) * m_ + k];
        }
      }
    }
    binv_ = std::move(inv);
    recompute_basics();
    pivots_since_refactor_ = 0;
  }

  void recompute_basics() {
    Vec resid = b_;
    for (int j = 0; j < total_; ++j) {
      if (stat_[j] == VStat::Basic) continue;
      const double v = nonbasic_value(j);
      if (v == 0.0) continue;
      if (j < n_) {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
          resid[col_row_[static_cast<std::size_t>(k)]] -= col_val_[static_cast<std::size_t>(k)] * v;
        }
      } else {
        const int r = j < n_ + m_ ? j - n_ : j - n_ - m_;
        resid[r] -= v;
      }
    }
    xB_.assign(static_cast<std::size_t>(m_), 0.0);
    for (int i = 0; i < m_; ++i) {
      const double ri = resid[i];
      if (ri == 0.0) continue;
      const double* col = &binv_[static_cast<std::size_t>(i) * m_];
      for (int k = 0; k < m_; ++k) xB_[k] += col[k] * ri;
    }
  }

  void full_values(Vec& x) const {
    x.assign(static_cast<std::size_t>(total_), 0.0);
    for (int j = 0; j < total_; ++j) {
      if (stat_[j] != VStat::Basic) x[j] = nonbasic_value(j);
    }
    for (int i = 0; i < m_; ++i) x[basis_[i]] = xB_[i];
  }

  bool verify_optimal() {
    Vec x;
    full_values(x);
    const double atol = opt_.tol;
    const double art_tol = opt_.tol * (1.0 + b_norm1_);

    // Primal: Ax + s + t = b row by row, plus variable bounds.
    Vec act(static_cast<std::size_t>(m_), 0.0);
    for (int j = 0; j < n_; ++j) {
      if (x[j] == 0.0) continue;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        act[col_row_[static_cast<std::size_t>(k)]] += col_val_[static_cast<std::size_t>(k)] * x[j];
      }
    }
    for (int i = 0; i < m_; ++i) {
      const double resid = act[i] + x[n_ + i] + x[n_ + m_ + i] - b_[i];
      if (std::fabs(resid) > atol * (1.0 + std::fabs(b_[i]))) return false;
    }
    for (int j = 0; j < total_; ++j) {
      const double tol = j >= n_ + m_ ? art_tol : atol;
      if (x[j] < lb_[j] - tol || x[j] > ub_[j] + tol) return false;
    }

    // Dual: reduced-cost sign conditions and the strong-duality gap.
    Vec y;
    btran(y);
    double dual_obj = dot(y, b_);
    double primal_obj = 0.0;
    for (int j = 0; j < total_; ++j) primal_obj += current_cost(j) * x[j];
    for (int j = 0; j < total_; ++j) {
      if (stat_[j] == VStat::Basic) {
        const double d = current_cost(j) - column_dot(j, y);
        if (std::fabs(d) > atol * 10.0) return false;
        continue;
      }
      const double d = current_cost(j) - column_dot(j, y);
      if (lb_[j] == ub_[j]) {
        dual_obj += d * x[j];
        continue;
      }
      switch (stat_[j]) {
        case VStat::AtLower:
          if (d < -atol) return false;
          dual_obj += d * x[j];
          break;
        case VStat::AtUpper:
          if (d > atol) return false;
          dual_obj += d * x[j];
          break;
        case VStat::Free:
          if (std::fabs(d) > atol) return false;
          break;
        default:
          break;
      }
    }
    return std::fabs(primal_obj - dual_obj) <= opt_.tol * (1.0 + std::fabs(primal_obj));
  }

  LpSolution extract_solution() {
    Vec x;
    full_values(x);
    Vec y;
    btran(y);

    LpSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.x.assign(x.begin(), x.begin() + n_);
    sol.row_duals.resize(static_cast<std::size_t>(m_));
    sol.reduced_costs.resize(static_cast<std::size_t>(n_));
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += cost2_[j] * x[j];
    const double flip = maximize_ ? -1.0 : 1.0;
    sol.objective = flip * obj;
    for (int i = 0; i < m_; ++i) sol.row_duals[i] = flip * y[i];
    for (int j = 0; j < n_; ++j) sol.reduced_costs[j] = flip * (cost2_[j] - column_dot(j, y));
    return sol;
  }

  SimplexOptions opt_;
  int n_ = 0, m_ = 0, total_ = 0;
  bool maximize_ = false;
  int phase_ = 1;
  std::vector<int> col_start_, col_row_;
  Vec col_val_;
  Vec lb_, ub_, cost1_, cost2_, b_, cB_, xB_, binv_, eta_;
  double b_norm1_ = 0.0;
  std::vector<int> basis_;
  std::vector<VStat> stat_;
  long pivots_total_ = 0;
  int pivots_since_refactor_ = 0;
};

}  // namespace

LpSolution SimplexSolver::solve(const LinearProgram& lp) {
  for (const Row& r : lp.rows()) {
    for (const auto& [j, v] : r.coeffs) {
      (void)v;
      if (j < 0 || j >= lp.num_vars()) {
        throw Error("solve_lp: row '" + r.name + "' references unknown variable");
      }
    }
  }
  SimplexCore core(lp, options_);
  return core.solve();
}

LpSolution solve_lp(const LinearProgram& lp, double tol) {
  SimplexOptions opt;
  opt.tol = tol;
  return SimplexSolver(opt).solve(lp);
}

}  // namespace dualsddp
