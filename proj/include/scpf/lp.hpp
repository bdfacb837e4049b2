#pragma once

// Dense tableau simplex for   max c'x  s.t.  Ax <= b, x >= 0, with b >= 0 so
// the origin is a feasible starting basis. Bland's rule prevents cycling.

#include "scpf/error.hpp"
#include "scpf/linalg.hpp"

#include <cstddef>
#include <limits>
#include <vector>

namespace scpf {

enum class LpStatus { optimal, unbounded };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  Vec x;
  double objective = 0.0;
  std::size_t pivots = 0;
};

inline LpResult maximize_lp(const Vec& c, const Mat& a, const Vec& b, double tol = 1e-12) {
  const auto m = a.rows(), n = a.cols();
  require(c.size() == n && b.size() == m, "LP: dimension mismatch");
  require(m == 0 || b.minCoeff() >= 0.0, "LP: right-hand side must be >= 0");

  // tableau [A I | b] with objective row [-c 0 | 0]
  Mat t = Mat::Zero(m + 1, n + m + 1);
  t.block(0, 0, m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.block(0, n + m, m, 1) = b;
  t.block(m, 0, 1, n) = -c.transpose();
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  LpResult res;
  const std::size_t max_pivots = 10000 + 100 * static_cast<std::size_t>(n + m);
  for (;;) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j)
      if (t(m, j) < -tol) {
        enter = j;  // smallest index with negative reduced cost
        break;
      }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) <= tol) continue;
      const double ratio = t(i, n + m) / t(i, enter);
      if (ratio < best - tol ||
          (ratio <= best + tol && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) {
      res.status = LpStatus::unbounded;
      return res;
    }
    if (++res.pivots > max_pivots) fail(ErrorCode::solver_stall, "LP: pivot budget exhausted");

    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i)
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  res.x = Vec::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto j = basis[static_cast<std::size_t>(i)];
    if (j < n) res.x[j] = t(i, n + m);
  }
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace scpf
