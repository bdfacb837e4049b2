#pragma once

// Share dimensioning: admissible carried load of a slice, share coupling
// matrix and the max-min share allocation.

#include "scpf/analytic_btd.hpp"
#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/lp.hpp"
#include "scpf/net_model.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace scpf {

inline constexpr double boundary_tolerance = 1e-10;

/// What one slice brings to the dimensioning problem.
struct SliceDemand {
  Vec relative;  // rho~^v
  Vec delta;
  double load = 0.0;    // rho^v
  double target = 0.0;  // d_v
};

inline double max_admissible_load(double target, const Vec& relative, const Vec& delta) {
  require(relative.size() == delta.size(), "relative load and delta must have equal length");
  const double best = relative.dot(delta);
  if (!(target > best))
    fail(ErrorCode::infeasible_target, "target " + std::to_string(target) + " is not above the best-case BTD " +
                                           std::to_string(best));
  const double norm_sq = weighted_norm_sq(relative, delta);
  if (!(norm_sq > degenerate_denominator)) fail(ErrorCode::degenerate_geometry, "relative load has zero norm");
  return (target - best) / norm_sq;
}

/// Row u holds slice u's constraint: (H s)_u >= 0 iff slice u meets its target.
/// Column v is slice v's coupling vector.
struct CouplingMatrix {
  Mat h;
  Vec limits;  // l_u
};

inline CouplingMatrix coupling_matrix(const std::vector<SliceDemand>& slices) {
  const auto V = static_cast<Eigen::Index>(slices.size());
  require(V >= 1, "at least one slice is required");
  CouplingMatrix cm{Mat::Identity(V, V), Vec(V)};
  for (Eigen::Index u = 0; u < V; ++u) {
    const auto& su = slices[static_cast<std::size_t>(u)];
    cm.limits[u] = max_admissible_load(su.target, su.relative, su.delta);
    if (!(su.load < cm.limits[u]))
      fail(ErrorCode::slice_overloaded, "slice " + std::to_string(u) + " carries " + std::to_string(su.load) +
                                            " >= admissible " + std::to_string(cm.limits[u]));
  }
  for (Eigen::Index u = 0; u < V; ++u) {
    const auto& su = slices[static_cast<std::size_t>(u)];
    const double sensitivity = (1.0 + su.load) / (cm.limits[u] - su.load);
    const double norm_sq = weighted_norm_sq(su.relative, su.delta);
    for (Eigen::Index v = 0; v < V; ++v) {
      if (v == u) continue;
      const auto& sv = slices[static_cast<std::size_t>(v)];
      cm.h(u, v) = -sensitivity * weighted_dot(su.relative, sv.relative, su.delta) / norm_sq;
    }
  }
  return cm;
}

enum class Admissibility { admissible, boundary, inadmissible };

inline const char* to_string(Admissibility a) {
  switch (a) {
    case Admissibility::admissible: return "admissible";
    case Admissibility::boundary: return "boundary";
    case Admissibility::inadmissible: return "inadmissible";
  }
  return "?";
}

struct ShareAllocation {
  Vec shares;
  double objective = 0.0;  // t* = max_s min_i (H s)_i
  Admissibility status = Admissibility::inadmissible;
};

/// max t s.t. H s >= t 1, 1's = 1, s >= 0. s_V is eliminated and t shifted
/// by K > max|H| so that the LP starts from a feasible origin.
inline ShareAllocation solve_maxmin_shares(const Mat& h) {
  const auto V = h.rows();
  require(V >= 1 && h.cols() == V, "coupling matrix must be square");
  require(h.allFinite(), "coupling matrix must be finite");

  ShareAllocation out;
  if (V == 1) {
    out.shares = Vec::Ones(1);
    out.objective = h(0, 0);
  } else {
    const double shift = h.cwiseAbs().maxCoeff() + 1.0;
    const auto n = V;  // s_0..s_{V-2}, t'
    Mat a = Mat::Zero(V + 1, n);
    Vec b(V + 1), c = Vec::Zero(n);
    c[n - 1] = 1.0;
    for (Eigen::Index i = 0; i < V; ++i) {
      for (Eigen::Index v = 0; v + 1 < V; ++v) a(i, v) = -(h(i, v) - h(i, V - 1));
      a(i, n - 1) = 1.0;
      b[i] = shift + h(i, V - 1);
    }
    for (Eigen::Index v = 0; v + 1 < V; ++v) a(V, v) = 1.0;
    b[V] = 1.0;
    const auto lp = maximize_lp(c, a, b);
    if (lp.status != LpStatus::optimal) fail(ErrorCode::solver_stall, "share LP reported unbounded");
    out.shares = Vec(V);
    double rest = 1.0;
    for (Eigen::Index v = 0; v + 1 < V; ++v) {
      out.shares[v] = std::max(0.0, lp.x[v]);
      rest -= out.shares[v];
    }
    out.shares[V - 1] = std::max(0.0, rest);
    out.shares /= out.shares.sum();
    out.objective = (h * out.shares).minCoeff();
  }
  if (out.objective > boundary_tolerance)
    out.status = Admissibility::admissible;
  else if (out.objective < -boundary_tolerance)
    out.status = Admissibility::inadmissible;
  else
    out.status = Admissibility::boundary;
  return out;
}

struct ShareCheck {
  Vec slack;           // s^v minus the coupling requirement, equals (H s)_v
  Vec linearized_btd;  // heavy-load BTD implied by the requirement; <= d_v iff slack >= 0
  Vec exact_btd;       // full mean-BTD formula at (s, loads); +inf where s^v = 0
};

inline ShareCheck verify_shares(const Vec& shares, const std::vector<SliceDemand>& slices) {
  const auto V = static_cast<Eigen::Index>(slices.size());
  require(shares.size() == V, "one share per slice");
  require(shares.minCoeff() >= 0.0 && std::abs(shares.sum() - 1.0) <= 1e-10, "shares must lie on the simplex");
  const auto cm = coupling_matrix(slices);

  ShareCheck out{cm.h * shares, Vec(V), Vec::Constant(V, std::numeric_limits<double>::infinity())};
  for (Eigen::Index v = 0; v < V; ++v) {
    const auto& sv = slices[static_cast<std::size_t>(v)];
    double cross = 0.0;
    for (Eigen::Index u = 0; u < V; ++u)
      if (u != v) cross += shares[u] * weighted_dot(sv.relative, slices[static_cast<std::size_t>(u)].relative, sv.delta);
    out.linearized_btd[v] = sv.relative.dot(sv.delta) + sv.load * weighted_norm_sq(sv.relative, sv.delta) +
                            (shares[v] > 0.0 ? (1.0 + sv.load) / shares[v] * cross
                                             : (cross > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
  }
  if (shares.minCoeff() > 0.0) {
    std::vector<double> s(static_cast<std::size_t>(V));
    std::vector<Vec> loads, deltas;
    for (Eigen::Index v = 0; v < V; ++v) {
      const auto& sv = slices[static_cast<std::size_t>(v)];
      s[static_cast<std::size_t>(v)] = shares[v] / shares.sum();
      loads.push_back(sv.relative * sv.load);
      deltas.push_back(sv.delta);
    }
    const auto profile = LoadProfile::from_loads(s, loads, deltas);
    for (Eigen::Index v = 0; v < V; ++v)
      if (slices[static_cast<std::size_t>(v)].load > 0.0) out.exact_btd[v] = mean_btd_scpf(profile, static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace scpf
