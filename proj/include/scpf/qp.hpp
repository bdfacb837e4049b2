#pragma once

// Strictly convex quadratic programs
//   min 1/2 z'Hz + g'z  s.t.  A_eq z = b_eq,  A_in z >= b_in
// by the Goldfarb-Idnani dual active-set method. H must be positive definite.
// The dimensions met here are small (a few hundred at most), so the projected
// operators are rebuilt densely at every step instead of being updated.

#include "scpf/error.hpp"
#include "scpf/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace scpf {

struct QpProblem {
  Mat hessian;
  Vec linear;
  Mat eq;      // rows are constraint normals
  Vec eq_rhs;
  Mat ineq;
  Vec ineq_rhs;
};

struct QpSolution {
  Vec z;
  double objective = 0.0;
  Vec eq_duals;    // stationarity: Hz + g = eq' * eq_duals + ineq' * ineq_duals
  Vec ineq_duals;  // >= 0, zero on inactive rows
  std::size_t iterations = 0;
};

namespace detail {

struct ActiveRow {
  bool equality;
  std::size_t index;
  double sign;  // equality rows may be added with a flipped normal
};

}  // namespace detail

inline QpSolution solve_qp(const QpProblem& qp, double tol = 1e-12, std::size_t max_iter = 0) {
  const auto n = qp.hessian.rows();
  require(qp.hessian.cols() == n && qp.linear.size() == n, "QP: inconsistent objective dimensions");
  const auto me = qp.eq.rows(), mi = qp.ineq.rows();
  require(me == 0 || qp.eq.cols() == n, "QP: equality rows must have n columns");
  require(mi == 0 || qp.ineq.cols() == n, "QP: inequality rows must have n columns");
  require(qp.eq_rhs.size() == me && qp.ineq_rhs.size() == mi, "QP: rhs sizes must match rows");
  if (max_iter == 0) max_iter = 50 * static_cast<std::size_t>(n + me + mi) + 100;

  Eigen::LLT<Mat> llt(qp.hessian);
  if (llt.info() != Eigen::Success) fail(ErrorCode::invalid_argument, "QP: Hessian is not positive definite");
  const Mat hinv = llt.solve(Mat::Identity(n, n));

  Vec z = -hinv * qp.linear;
  std::vector<detail::ActiveRow> active;
  std::vector<double> u;  // multipliers of the active rows

  const auto normal = [&](const detail::ActiveRow& r) -> Vec {
    return r.sign * (r.equality ? Vec(qp.eq.row(static_cast<Eigen::Index>(r.index)).transpose())
                                : Vec(qp.ineq.row(static_cast<Eigen::Index>(r.index)).transpose()));
  };
  const auto rhs = [&](const detail::ActiveRow& r) {
    return r.sign * (r.equality ? qp.eq_rhs[static_cast<Eigen::Index>(r.index)]
                                : qp.ineq_rhs[static_cast<Eigen::Index>(r.index)]);
  };
  const double scale = 1.0 + qp.linear.cwiseAbs().maxCoeff();

  std::size_t iter = 0;
  // Adds row p (already oriented so that it is violated or tight). Returns
  // false when the feasible set is empty.
  const auto add_row = [&](detail::ActiveRow p) -> bool {
    const Vec np = normal(p);
    const double bp = rhs(p);
    double up = 0.0;
    for (;;) {
      if (++iter > max_iter) fail(ErrorCode::solver_stall, "QP: iteration budget exhausted");
      const auto q = static_cast<Eigen::Index>(active.size());
      Mat N(n, q);
      for (Eigen::Index j = 0; j < q; ++j) N.col(j) = normal(active[static_cast<std::size_t>(j)]);
      Vec zdir, r;
      if (q == 0) {
        zdir = hinv * np;
        r = Vec();
      } else {
        const Mat hn = hinv * N;
        const Mat m = N.transpose() * hn;
        Eigen::LDLT<Mat> ldlt(m);
        r = ldlt.solve(hn.transpose() * np);  // N* n_p
        zdir = hinv * np - hn * r;            // Hop n_p
      }
      const double slack = np.dot(z) - bp;
      const double curv = zdir.dot(np);
      // partial step: first inequality multiplier hitting zero
      double t1 = std::numeric_limits<double>::infinity();
      std::size_t drop = 0;
      for (std::size_t j = 0; j < active.size(); ++j) {
        if (active[j].equality) continue;
        const double rj = r[static_cast<Eigen::Index>(j)];
        if (rj > tol) {
          const double tj = u[j] / rj;
          if (tj < t1) {
            t1 = tj;
            drop = j;
          }
        }
      }
      const bool has_curvature = curv > tol * (1.0 + np.squaredNorm()) * 1e-2;
      const double t2 = has_curvature ? std::max(0.0, -slack / curv) : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        if (std::abs(slack) <= 1e-9 * scale && p.equality) {
          // redundant equality already satisfied
          return true;
        }
        return false;
      }
      if (has_curvature) z += t * zdir;
      for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t * r[static_cast<Eigen::Index>(j)];
      up += t;
      if (t == t2) {
        active.push_back(p);
        u.push_back(up);
        return true;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  };

  for (Eigen::Index i = 0; i < me; ++i) {
    const double s = qp.eq.row(i).dot(z) - qp.eq_rhs[i];
    detail::ActiveRow row{true, static_cast<std::size_t>(i), s > 0.0 ? -1.0 : 1.0};
    if (!add_row(row)) fail(ErrorCode::empty_polytope, "QP: equality constraints are inconsistent");
  }

  for (;;) {
    double worst = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < mi; ++i) {
      bool is_active = false;
      for (const auto& a : active)
        if (!a.equality && a.index == static_cast<std::size_t>(i)) is_active = true;
      if (is_active) continue;
      const double nrm = 1.0 + qp.ineq.row(i).norm();
      const double s = (qp.ineq.row(i).dot(z) - qp.ineq_rhs[i]) / nrm;
      if (s < worst) {
        worst = s;
        pick = i;
      }
    }
    if (pick < 0 || worst > -tol * scale) break;
    if (!add_row({false, static_cast<std::size_t>(pick), 1.0}))
      fail(ErrorCode::empty_polytope, "QP: constraints admit no feasible point");
  }

  QpSolution sol;
  sol.z = z;
  sol.objective = 0.5 * z.dot(qp.hessian * z) + qp.linear.dot(z);
  sol.eq_duals = Vec::Zero(me);
  sol.ineq_duals = Vec::Zero(mi);
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto& a = active[j];
    if (a.equality)
      sol.eq_duals[static_cast<Eigen::Index>(a.index)] += a.sign * u[j];
    else
      sol.ineq_duals[static_cast<Eigen::Index>(a.index)] += u[j];
  }
  sol.iterations = iter;
  return sol;
}

/// Largest violation of the KKT conditions (stationarity, primal and dual
/// feasibility, complementarity) at a candidate solution.
inline double qp_kkt_residual(const QpProblem& qp, const QpSolution& s) {
  Vec grad = qp.hessian * s.z + qp.linear;
  if (qp.eq.rows() > 0) grad -= qp.eq.transpose() * s.eq_duals;
  if (qp.ineq.rows() > 0) grad -= qp.ineq.transpose() * s.ineq_duals;
  double r = grad.cwiseAbs().maxCoeff();
  if (qp.eq.rows() > 0) r = std::max(r, (qp.eq * s.z - qp.eq_rhs).cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < qp.ineq.rows(); ++i) {
    const double slack = qp.ineq.row(i).dot(s.z) - qp.ineq_rhs[i];
    r = std::max({r, -slack, -s.ineq_duals[i], std::abs(slack * s.ineq_duals[i])});
  }
  return r;
}

}  // namespace scpf
