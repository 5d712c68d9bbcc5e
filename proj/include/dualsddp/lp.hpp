#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace dualsddp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ObjSense { Minimize, Maximize };
enum class RowSense { Equal, LessEqual, GreaterEqual };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  double cost = 0.0;
};

struct Row {
  std::string name;
  RowSense sense = RowSense::Equal;
  double rhs = 0.0;
  std::vector<std::pair<int, double>> coeffs;  // (variable id, coefficient)
};

/// A linear program over boxed variables. Variable and row ids are the
/// insertion indices and stay stable for the lifetime of the object.
/// Instances are treated as immutable values once fully built.
class LinearProgram {
 public:
  explicit LinearProgram(ObjSense sense = ObjSense::Minimize) : sense_(sense) {}

  int add_variable(std::string name, double lower, double upper, double cost) {
    vars_.push_back({std::move(name), lower, upper, cost});
    return static_cast<int>(vars_.size()) - 1;
  }

  int add_row(std::string name, RowSense sense, double rhs,
              std::vector<std::pair<int, double>> coeffs) {
    rows_.push_back({std::move(name), sense, rhs, std::move(coeffs)});
    return static_cast<int>(rows_.size()) - 1;
  }

  ObjSense sense() const { return sense_; }
  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<Variable>& vars() const { return vars_; }
  const std::vector<Row>& rows() const { return rows_; }
  const Variable& var(int j) const { return vars_[static_cast<std::size_t>(j)]; }
  const Row& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }

  /// Returns one message per violated well-formedness invariant:
  /// coefficient indices in range, lower <= upper, unique names.
  std::vector<std::string> validate() const;

 private:
  ObjSense sense_;
  std::vector<Variable> vars_;
  std::vector<Row> rows_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded };

/// Row duals follow the value-function convention: for each row i,
/// row_duals[i] is the derivative of the optimal objective with respect to
/// the right-hand side, in the problem's stated sense. For a minimization
/// this makes the multiplier of a >= row nonnegative and of a <= row
/// nonpositive; mirrored for maximization.
struct LpSolution {
  SolveStatus status = SolveStatus::Optimal;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> x;
  std::vector<double> row_duals;
  std::vector<double> reduced_costs;
};

/// Plain-text export, one constraint per line, exact decimal rendering
/// (shortest round-trip), for cross-checks with third-party solvers.
void write_lp_text(const LinearProgram& lp, std::ostream& os);

}  // namespace dualsddp
