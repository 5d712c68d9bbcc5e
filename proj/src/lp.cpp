#include "dualsddp/lp.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <string>

namespace dualsddp {

namespace {

// Shortest decimal rendering that round-trips the double exactly.
std::string render(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::vector<std::string> LinearProgram::validate() const {
  std::vector<std::string> issues;
  for (int j = 0; j < num_vars(); ++j) {
    const Variable& v = vars_[static_cast<std::size_t>(j)];
    if (!(v.lower <= v.upper)) {
      issues.push_back("variable '" + v.name + "': lower > upper");
    }
    if (std::isnan(v.lower) || std::isnan(v.upper) || std::isnan(v.cost)) {
      issues.push_back("variable '" + v.name + "': NaN data");
    }
  }
  for (int i = 0; i < num_rows(); ++i) {
    const Row& r = rows_[static_cast<std::size_t>(i)];
    if (std::isnan(r.rhs)) issues.push_back("row '" + r.name + "': NaN rhs");
    for (const auto& [j, v] : r.coeffs) {
      if (j < 0 || j >= num_vars()) {
        issues.push_back("row '" + r.name + "': coefficient references unknown variable " +
                         std::to_string(j));
      }
      if (std::isnan(v)) issues.push_back("row '" + r.name + "': NaN coefficient");
    }
  }
  std::set<std::string> seen;
  for (const Variable& v : vars_) {
    if (!seen.insert(v.name).second) issues.push_back("duplicate variable name '" + v.name + "'");
  }
  seen.clear();
  for (const Row& r : rows_) {
    if (!seen.insert(r.name).second) issues.push_back("duplicate row name '" + r.name + "'");
  }
  return issues;
}

void write_lp_text(const LinearProgram& lp, std::ostream& os) {
  os << (lp.sense() == ObjSense::Minimize ? "minimize" : "maximize");
  for (int j = 0; j < lp.num_vars(); ++j) {
    const Variable& v = lp.var(j);
    if (v.cost != 0.0) os << " " << render(v.cost) << " " << v.name;
  }
  os << "\n";
  for (const Row& r : lp.rows()) {
    os << r.name << ":";
    for (const auto& [j, v] : r.coeffs) {
      os << " " << render(v) << " " << lp.var(j).name;
    }
    switch (r.sense) {
      case RowSense::Equal:
        os << " = ";
        break;
      case RowSense::LessEqual:
        os << " <= ";
        break;
      case RowSense::GreaterEqual:
        os << " >= ";
        break;
    }
    os << render(r.rhs) << "\n";
  }
  for (const Variable& v : lp.vars()) {
    os << "bound: " << render(v.lower) << " <= " << v.name << " <= " << render(v.upper) << "\n";
  }
}

}  // namespace dualsddp
