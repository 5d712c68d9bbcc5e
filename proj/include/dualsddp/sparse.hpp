#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace dualsddp {

using Vec = std::vector<double>;

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Sparse matrix in triplet form. Duplicate (row, col) entries are additive.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<Triplet> entries;

  SparseMatrix() = default;
  SparseMatrix(int r, int c) : rows(r), cols(c) {}

  void add(int r, int c, double v) {
    if (v != 0.0) entries.push_back({r, c, v});
  }

  bool indices_in_range() const {
    for (const auto& e : entries) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) return false;
    }
    return true;
  }

  /// y += A x
  void multiply_add(const Vec& x, Vec& y) const {
    for (const auto& e : entries) y[e.row] += e.value * x[e.col];
  }

  /// y += A^T x
  void transpose_multiply_add(const Vec& x, Vec& y) const {
    for (const auto& e : entries) y[e.col] += e.value * x[e.row];
  }

  /// Maximum over columns of the sum of absolute entries.
  double max_abs_col_sum() const {
    Vec s(static_cast<std::size_t>(cols), 0.0);
    for (const auto& e : entries) s[e.col] += std::fabs(e.value);
    double m = 0.0;
    for (double v : s) m = std::max(m, v);
    return m;
  }

  static SparseMatrix identity(int n) {
    SparseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.add(i, i, 1.0);
    return m;
  }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double max_abs(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace dualsddp
