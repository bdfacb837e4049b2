#pragma once

// Traffic-shaping game between slices that choose admission policies. A
// policy is parameterized by the admitted relative load rho~ and x = 1/rho.
// Contains the penalized GNEP iteration, the saturated-regime equilibrium
// and the static-slicing baseline.

#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/net_model.hpp"
#include "scpf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scpf {

/// M = diag(gamma)^{-1} (I - Q^T) diag(mu)^{-1}, restricted to the stations
/// with positive arrivals. Rows of (I - Q^T) diag(mu)^{-1} at zero-arrival
/// stations become equality constraints `k rho~ = 0`: nothing can be admitted
/// there, so the admitted load must satisfy flow balance with no inflow.
struct MobilityOperator {
  Mat m;        // |support| x B
  Mat k;        // |null| x B
  Mat inverse;  // B x |support|: rho = inverse * a
  Vec offered;  // rho at a = 1
  std::vector<std::size_t> support;
  std::vector<std::size_t> null;

  std::size_t stations() const { return static_cast<std::size_t>(m.cols()); }

  /// Admission probabilities at the support stations for policy (rho~, x).
  Vec admission(const Vec& relative, double x) const { return m * relative / x; }
};

inline MobilityOperator build_mobility_operator(const Vec& arrivals, const Mat& routing, const Vec& sojourn) {
  const auto B = arrivals.size();
  require(sojourn.size() == B && sojourn.minCoeff() > 0.0, "mu must be positive with length B");
  require(arrivals.allFinite() && arrivals.minCoeff() >= 0.0, "gamma must be finite and >= 0");
  require(arrivals.maxCoeff() > 0.0, "gamma must have a positive entry");
  const Mat flow = Mat::Identity(B, B) - routing.transpose();
  Eigen::PartialPivLU<Mat> lu(flow);
  if (!(lu.rcond() > 1.0 / max_condition_number)) fail(ErrorCode::singular_routing, "I - Q^T is numerically singular");
  const Mat flow_mu = flow * sojourn.cwiseInverse().asDiagonal();

  MobilityOperator op;
  for (Eigen::Index b = 0; b < B; ++b)
    (arrivals[b] > 0.0 ? op.support : op.null).push_back(static_cast<std::size_t>(b));
  const auto S = static_cast<Eigen::Index>(op.support.size());
  op.m.resize(S, B);
  op.k.resize(static_cast<Eigen::Index>(op.null.size()), B);
  Mat gamma_cols = Mat::Zero(B, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const auto b = static_cast<Eigen::Index>(op.support[static_cast<std::size_t>(i)]);
    op.m.row(i) = flow_mu.row(b) / arrivals[b];
    gamma_cols(b, i) = arrivals[b];
  }
  for (std::size_t i = 0; i < op.null.size(); ++i)
    op.k.row(static_cast<Eigen::Index>(i)) = flow_mu.row(static_cast<Eigen::Index>(op.null[i]));
  op.inverse = sojourn.asDiagonal() * lu.solve(gamma_cols);
  op.offered = op.inverse * Vec::Ones(S);

  const double residual = (op.m * op.inverse - Mat::Identity(S, S)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-10)) fail(ErrorCode::singular_routing, "mobility operator inverse residual too large");
  return op;
}

inline MobilityOperator build_mobility_operator(const SliceSpec& slice) {
  return build_mobility_operator(slice.arrivals, slice.routing, slice.sojourn);
}

struct GameSlice {
  double share = 1.0;
  double target = 2.0;  // capacity-normalized BTD target d~
  MobilityOperator op;
};

struct GameInstance {
  std::size_t stations = 0;
  std::vector<GameSlice> slices;

  std::size_t size() const { return slices.size(); }
};

inline GameInstance make_game(const TrafficModel& model, std::span<const double> targets) {
  require(targets.size() == model.size(), "one normalized target per slice");
  GameInstance g;
  g.stations = model.stations();
  for (std::size_t v = 0; v < model.size(); ++v) {
    require(targets[v] > 1.0, "normalized targets must exceed 1");
    g.slices.push_back({model.slice(v).share, targets[v], build_mobility_operator(model.slice(v))});
  }
  return g;
}

/// Targets taken from each slice's normalized target, or d / mean(delta).
inline GameInstance make_game(const TrafficModel& model) {
  std::vector<double> targets;
  for (const auto& sl : model.slices()) {
    if (sl.normalized_target)
      targets.push_back(*sl.normalized_target);
    else if (sl.target)
      targets.push_back(*sl.target / sl.delta.mean());
    else
      fail(ErrorCode::invalid_argument, "slice " + sl.name + " has no BTD target");
  }
  return make_game(model, targets);
}

struct Strategy {
  Vec relative;
  double x = 1.0;

  double load() const { return 1.0 / x; }
};

using StrategyProfile = std::vector<Strategy>;

inline Vec aggregate_relative(const GameInstance& g, const StrategyProfile& y, std::optional<std::size_t> skip = {}) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(g.stations));
  for (std::size_t u = 0; u < g.size(); ++u)
    if (!skip || *skip != u) out += g.slices[u].share * y[u].relative;
  return out;
}

/// h_v(y) = <g~, rho~^v> - s^v (d~_v - 1) x_v
inline double btd_penalty(const GameInstance& g, const StrategyProfile& y, std::size_t v) {
  const auto& sl = g.slices[v];
  return aggregate_relative(g, y).dot(y[v].relative) - sl.share * (sl.target - 1.0) * y[v].x;
}

/// Gradient of h_v with respect to (rho~^v, x_v); the own term of g~ is
/// differentiated too.
inline Vec btd_penalty_gradient(const GameInstance& g, const StrategyProfile& y, std::size_t v) {
  const auto& sl = g.slices[v];
  const auto B = static_cast<Eigen::Index>(g.stations);
  Vec grad(B + 1);
  grad.head(B) = aggregate_relative(g, y) + sl.share * y[v].relative;
  grad[B] = -sl.share * (sl.target - 1.0);
  return grad;
}

namespace detail {

// Constraints of {1'r = 1, k r = 0, m r >= 0, m r <= x} (upper bound optional).
inline void slice_constraints(const MobilityOperator& op, std::optional<double> upper, QpProblem& qp) {
  const auto B = op.m.cols();
  const auto nk = op.k.rows(), S = op.m.rows();
  qp.eq.resize(1 + nk, B);
  qp.eq.row(0).setOnes();
  if (nk > 0) qp.eq.bottomRows(nk) = op.k;
  qp.eq_rhs = Vec::Zero(1 + nk);
  qp.eq_rhs[0] = 1.0;
  const auto rows = upper ? 2 * S : S;
  qp.ineq.resize(rows, B);
  qp.ineq_rhs = Vec::Zero(rows);
  qp.ineq.topRows(S) = op.m;
  if (upper) {
    qp.ineq.bottomRows(S) = -op.m;
    qp.ineq_rhs.tail(S).setConstant(-*upper);
  }
}

struct ValueAt {
  double value;       // phi(x)
  double derivative;  // d phi / dx
  Vec relative;       // minimizer
};

// phi(x) = min { <c, r> + w ||r||^2 : r in P(x) }.
inline ValueAt shaped_value(const MobilityOperator& op, const Vec& linear, double weight, double x) {
  QpProblem qp;
  const auto B = op.m.cols();
  qp.hessian = 2.0 * weight * Mat::Identity(B, B);
  qp.linear = linear;
  slice_constraints(op, x, qp);
  QpSolution sol;
  try {
    sol = solve_qp(qp);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::empty_polytope) throw;
    // x at the admit-all floor: the polytope is a single point and round-off
    // can leave it empty
    slice_constraints(op, x * (1.0 + 1e-10), qp);
    sol = solve_qp(qp);
  }
  const auto S = op.m.rows();
  return {sol.objective, -sol.ineq_duals.tail(S).sum(), sol.z};
}

}  // namespace detail

/// Smallest x for which P(x) is nonempty: admit everything.
inline double admit_all_x(const MobilityOperator& op) { return 1.0 / op.offered.sum(); }

inline Strategy admit_all(const MobilityOperator& op) { return {op.offered / op.offered.sum(), admit_all_x(op)}; }

/// theta_v = e^{x_v} + lambda_v [h_v]_+
inline double penalized_objective(const GameInstance& g, const StrategyProfile& y, std::size_t v, double lambda) {
  return std::exp(y[v].x) + lambda * std::max(0.0, btd_penalty(g, y, v));
}

struct BestResponse {
  Strategy strategy;
  double objective = 0.0;  // theta_v at the response, regularizer excluded
  double gradient = 0.0;   // subgradient of the regularized objective in x at the response
  std::size_t evaluations = 0;
};

/// Minimizer over {1'r = 1, 0 <= M r <= x} of
///   e^x + lambda [h_v]_+ + eps/2 (x - x_v)^2
/// with the other slices frozen. For fixed x the best r minimizes
/// f(r) = <g~_{-v}, r> + s ||r||^2, so the problem reduces to a convex scalar
/// problem in x, solved by bisection on the sign of its subgradient.
inline BestResponse penalized_best_response(const GameInstance& g, const StrategyProfile& y, std::size_t v,
                                            double lambda, double eps, double tol = 1e-8) {
  require(lambda >= 0.0 && eps >= 0.0, "lambda and eps must be >= 0");
  const auto& sl = g.slices[v];
  const Vec others = aggregate_relative(g, y, v);
  const double c = sl.share * (sl.target - 1.0);
  const double x_cur = y[v].x;
  BestResponse br;

  const auto eval = [&](double x) {
    ++br.evaluations;
    auto val = detail::shaped_value(sl.op, others, sl.share, x);
    const double excess = val.value - c * x;
    const double slope = std::exp(x) + eps * (x - x_cur) + (excess > 0.0 ? lambda * (val.derivative - c) : 0.0);
    return std::pair{slope, std::move(val)};
  };

  const double lo0 = admit_all_x(sl.op);
  double lo = lo0;
  auto [slope_lo, val_lo] = eval(lo);
  double x_star = lo;
  Vec rel_star = val_lo.relative;
  double slope_star = slope_lo;
  if (slope_lo < 0.0) {
    double hi = std::max(lo, x_cur) + 1.0;
    auto [slope_hi, val_hi] = eval(hi);
    for (int k = 0; slope_hi < 0.0; ++k) {
      if (k > 200) fail(ErrorCode::solver_stall, "best response: no upper bracket");
      lo = hi;
      hi = 2.0 * hi;
      std::tie(slope_hi, val_hi) = eval(hi);
    }
    x_star = hi;
    rel_star = val_hi.relative;
    slope_star = slope_hi;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++k) {
      const double mid = 0.5 * (lo + hi);
      auto [s, val] = eval(mid);
      if (s < 0.0) {
        lo = mid;
      } else {
        hi = mid;
        x_star = mid;
        rel_star = std::move(val.relative);
        slope_star = s;
      }
      if (s == 0.0) break;
    }
    if (!(hi - lo <= std::max(tol, 1e-15 * std::max(1.0, hi)) || slope_star == 0.0))
      fail(ErrorCode::solver_stall, "best response bisection did not reach tolerance");
  }
  br.strategy = {rel_star, x_star};
  br.gradient = slope_star;
  StrategyProfile trial = y;
  trial[v] = br.strategy;
  br.objective = penalized_objective(g, trial, v, lambda);
  return br;
}

struct OmegaEvaluation {
  double omega = 0.0;
  std::vector<double> terms;  // per-slice contribution
  std::vector<BestResponse> responses;
};

/// Omega_eps(y; lambda) = sum_v theta_v(y) - theta_v(L_v(y)) - eps/2 (x_v - x_v^L)^2
inline OmegaEvaluation omega_metric(const GameInstance& g, const StrategyProfile& y, const Vec& lambda, double eps) {
  OmegaEvaluation out;
  for (std::size_t v = 0; v < g.size(); ++v) {
    auto br = penalized_best_response(g, y, v, lambda[static_cast<Eigen::Index>(v)], eps);
    const double dx = y[v].x - br.strategy.x;
    const double term = penalized_objective(g, y, v, lambda[static_cast<Eigen::Index>(v)]) - br.objective -
                        0.5 * eps * dx * dx;
    out.terms.push_back(term);
    out.omega += term;
    out.responses.push_back(std::move(br));
  }
  return out;
}

struct GnepParams {
  double epsilon = 0.01;
  double beta = 0.5;
  double sigma = 0.1;
  double eta = 0.5;
  double tol = 1e-6;
  std::size_t max_iter = 500;
  double lambda0 = 1.0;
  int max_backtracks = 60;
};

struct GnepTraceRow {
  std::size_t k;
  double omega;
  double step;
  double xi_norm;
  double epsilon;
  double max_violation;
  std::vector<double> lambda;
};

struct SliceEquilibrium {
  Vec relative;
  double load = 0.0;
  Vec relative_ss;
  double load_ss = 0.0;
  double gain = 0.0;
  double penalty = 0.0;  // h_v at the solution
  Vec admission;
};

struct EquilibriumResult {
  std::vector<SliceEquilibrium> slices;
  // saturated solutions: KKT data of the joint problem
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  Vec zeta;
  std::vector<Vec> chi;
  // GNEP solutions
  bool converged = false;
  std::size_t iterations = 0;
  double omega = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> unilateral_improvement;
  Vec lambda;
  double epsilon = 0.0;
  std::vector<GnepTraceRow> trace;
  std::vector<std::string> warnings;
};

inline double profile_distance(const StrategyProfile& a, const StrategyProfile& b) {
  double s = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    s += (a[v].relative - b[v].relative).squaredNorm();
    s += (a[v].x - b[v].x) * (a[v].x - b[v].x);
  }
  return std::sqrt(s);
}

// Static-slicing optimum, declared here for use by the solvers below.
struct SsPolicy {
  Vec relative;
  double load = 0.0;
};
inline SsPolicy ss_optimal_policy(const GameSlice& slice);
inline SsPolicy ss_policy(const GameSlice& slice);

/// Penalized GNEP iteration with an Armijo-type line search on Omega and
/// multiplier doubling for slices whose BTD constraint is violated.
inline EquilibriumResult solve_gnep(const GameInstance& g, const GnepParams& p = {},
                                    std::optional<StrategyProfile> start = {}) {
  require(g.size() >= 1, "at least one slice is required");
  for (const auto& sl : g.slices) require(sl.target > 1.0, "normalized targets must exceed 1");
  require(p.beta > 0.0 && p.beta < 1.0 && p.sigma > 0.0 && p.sigma < 1.0, "beta and sigma must lie in (0, 1)");
  require(p.eta > 0.0 && p.eta < 1.0 && p.epsilon > 0.0, "eta must lie in (0, 1) and eps must be positive");
  const std::size_t V = g.size();

  StrategyProfile y;
  if (start) {
    y = *start;
  } else {
    for (const auto& sl : g.slices) y.push_back(admit_all(sl.op));
  }
  Vec lambda = Vec::Constant(static_cast<Eigen::Index>(V), p.lambda0);
  double eps = p.epsilon;
  EquilibriumResult res;

  auto current = omega_metric(g, y, lambda, eps);
  const auto max_violation = [&](const StrategyProfile& s) {
    double m = 0.0;
    for (std::size_t v = 0; v < V; ++v) m = std::max(m, btd_penalty(g, s, v));
    return m;
  };

  std::size_t k = 0;
  int eps_halvings = 0;
  for (;; ++k) {
    const double viol = max_violation(y);
    if (current.omega < p.tol && viol < p.tol) {
      res.converged = true;
      break;
    }
    if (k >= p.max_iter) break;

    StrategyProfile target(V);
    for (std::size_t v = 0; v < V; ++v) target[v] = current.responses[v].strategy;
    const double xi_norm = profile_distance(target, y);

    double t = 1.0;
    bool accepted = false;
    StrategyProfile next;
    OmegaEvaluation next_eval;
    for (int l = 0; l <= p.max_backtracks; ++l, t *= p.beta) {
      next = y;
      for (std::size_t v = 0; v < V; ++v) {
        next[v].relative = y[v].relative + t * (target[v].relative - y[v].relative);
        next[v].x = y[v].x + t * (target[v].x - y[v].x);
      }
      next_eval = omega_metric(g, next, lambda, eps);
      if (next_eval.omega <= current.omega - p.sigma * t * t * xi_norm) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (++eps_halvings > 20)
        fail(ErrorCode::line_search_exhausted, "no step size satisfies the descent test at iteration " +
                                                   std::to_string(k) + " (Omega = " + std::to_string(current.omega) + ")");
      eps *= 0.5;
      res.warnings.push_back("line search failed at iteration " + std::to_string(k) + "; eps halved to " +
                             std::to_string(eps));
      current = omega_metric(g, y, lambda, eps);
      continue;
    }

    // multiplier update uses the state before the move
    bool changed = false;
    for (std::size_t v = 0; v < V; ++v) {
      if (!(btd_penalty(g, y, v) > 0.0)) continue;
      const auto vi = static_cast<Eigen::Index>(v);
      const double gnorm = btd_penalty_gradient(g, y, v).norm();
      if (std::exp(y[v].x) > p.eta * lambda[vi] * gnorm) {
        lambda[vi] *= 2.0;
        changed = true;
      }
    }
    res.trace.push_back({k, current.omega, t, xi_norm, eps, viol, to_std(lambda)});
    y = std::move(next);
    current = changed ? omega_metric(g, y, lambda, eps) : std::move(next_eval);
  }
  res.trace.push_back({k, current.omega, 0.0, 0.0, eps, max_violation(y), to_std(lambda)});

  res.iterations = k;
  res.omega = current.omega;
  res.lambda = lambda;
  res.epsilon = eps;
  for (std::size_t v = 0; v < V; ++v) {
    const double lam = lambda[static_cast<Eigen::Index>(v)];
    res.unilateral_improvement.push_back(penalized_objective(g, y, v, lam) - current.responses[v].objective);
    SliceEquilibrium se;
    se.relative = y[v].relative;
    se.load = y[v].load();
    se.penalty = btd_penalty(g, y, v);
    se.admission = g.slices[v].op.admission(y[v].relative, y[v].x);
    const auto ss = ss_policy(g.slices[v]);
    se.relative_ss = ss.relative;
    se.load_ss = ss.load;
    se.gain = se.load / ss.load;
    res.slices.push_back(std::move(se));
  }
  if (!res.converged)
    fail(ErrorCode::no_convergence, "GNEP did not converge in " + std::to_string(p.max_iter) +
                                        " iterations (Omega = " + std::to_string(current.omega) + ")");
  return res;
}

enum class SaturatedMethod { active_set, block_coordinate, projected_gradient };

namespace detail {

inline QpProblem joint_saturated_qp(const GameInstance& g) {
  const auto V = static_cast<Eigen::Index>(g.size());
  const auto B = static_cast<Eigen::Index>(g.stations);
  Vec s(V);
  for (Eigen::Index v = 0; v < V; ++v) s[v] = g.slices[static_cast<std::size_t>(v)].share;
  Mat coupling = s * s.transpose();
  coupling.diagonal() += s.cwiseProduct(s);
  QpProblem qp;
  qp.hessian = Mat::Zero(V * B, V * B);
  for (Eigen::Index a = 0; a < V; ++a)
    for (Eigen::Index b = 0; b < V; ++b) qp.hessian.block(a * B, b * B, B, B) = coupling(a, b) * Mat::Identity(B, B);
  qp.linear = Vec::Zero(V * B);

  Eigen::Index me = 0, mi = 0;
  for (const auto& sl : g.slices) {
    me += 1 + sl.op.k.rows();
    mi += sl.op.m.rows();
  }
  qp.eq = Mat::Zero(me, V * B);
  qp.eq_rhs = Vec::Zero(me);
  qp.ineq = Mat::Zero(mi, V * B);
  qp.ineq_rhs = Vec::Zero(mi);
  Eigen::Index re = 0, ri = 0;
  for (Eigen::Index v = 0; v < V; ++v) {
    const auto& op = g.slices[static_cast<std::size_t>(v)].op;
    qp.eq.block(re, v * B, 1, B).setOnes();
    qp.eq_rhs[re] = 1.0;
    if (op.k.rows() > 0) qp.eq.block(re + 1, v * B, op.k.rows(), B) = op.k;
    re += 1 + op.k.rows();
    qp.ineq.block(ri, v * B, op.m.rows(), B) = op.m;
    ri += op.m.rows();
  }
  return qp;
}

inline double saturated_objective(const GameInstance& g, const std::vector<Vec>& r) {
  Vec agg = Vec::Zero(static_cast<Eigen::Index>(g.stations));
  double own = 0.0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const double s = g.slices[v].share;
    agg += s * r[v];
    own += s * s * r[v].squaredNorm();
  }
  return 0.5 * (agg.squaredNorm() + own);
}

// Euclidean projection onto Gamma^v.
inline Vec project_gamma(const MobilityOperator& op, const Vec& point) {
  QpProblem qp;
  const auto B = op.m.cols();
  qp.hessian = Mat::Identity(B, B);
  qp.linear = -point;
  slice_constraints(op, std::nullopt, qp);
  return solve_qp(qp).z;
}

inline std::vector<Vec> saturated_block_coordinate(const GameInstance& g, double tol, std::size_t max_sweeps) {
  const std::size_t V = g.size();
  std::vector<Vec> r;
  for (const auto& sl : g.slices) r.push_back(project_gamma(sl.op, Vec::Constant(static_cast<Eigen::Index>(g.stations), 1.0 / static_cast<double>(g.stations))));
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      Vec others = Vec::Zero(static_cast<Eigen::Index>(g.stations));
      for (std::size_t u = 0; u < V; ++u)
        if (u != v) others += g.slices[u].share * r[u];
      const double s = g.slices[v].share;
      // block objective: s^2 ||r||^2 + s <others, r>
      QpProblem qp;
      const auto B = static_cast<Eigen::Index>(g.stations);
      qp.hessian = 2.0 * s * s * Mat::Identity(B, B);
      qp.linear = s * others;
      slice_constraints(g.slices[v].op, std::nullopt, qp);
      Vec next = solve_qp(qp).z;
      change = std::max(change, (next - r[v]).cwiseAbs().maxCoeff());
      r[v] = std::move(next);
    }
    if (change < tol) return r;
  }
  fail(ErrorCode::solver_stall, "block-coordinate descent did not converge");
}

inline std::vector<Vec> saturated_projected_gradient(const GameInstance& g, double tol, std::size_t max_iter) {
  const std::size_t V = g.size();
  const auto B = static_cast<Eigen::Index>(g.stations);
  double lip = 0.0, ssq = 0.0;
  for (const auto& sl : g.slices) {
    ssq += sl.share * sl.share;
    lip = std::max(lip, sl.share * sl.share);
  }
  const double step = 1.0 / (ssq + lip);
  std::vector<Vec> r, z;
  for (const auto& sl : g.slices) r.push_back(project_gamma(sl.op, Vec::Constant(B, 1.0 / static_cast<double>(B))));
  z = r;
  double tk = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vec agg = Vec::Zero(B);
    for (std::size_t v = 0; v < V; ++v) agg += g.slices[v].share * z[v];
    std::vector<Vec> next(V);
    double change = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double s = g.slices[v].share;
      const Vec grad = s * agg + s * s * z[v];
      next[v] = project_gamma(g.slices[v].op, z[v] - step * grad);
      change = std::max(change, (next[v] - r[v]).cwiseAbs().maxCoeff());
    }
    // accelerated step, restarted whenever the objective goes up
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const bool restart = saturated_objective(g, next) > saturated_objective(g, r);
    for (std::size_t v = 0; v < V; ++v)
      z[v] = restart ? next[v] : Vec(next[v] + ((tk - 1.0) / tn) * (next[v] - r[v]));
    tk = restart ? 1.0 : tn;
    r = std::move(next);
    if (change < tol) return r;
  }
  fail(ErrorCode::solver_stall, "projected gradient did not converge");
}

}  // namespace detail

/// Equilibrium relative loads and carried loads in the saturated regime:
/// argmin over prod Gamma^v of ||sum s^v r^v||^2 + sum (s^v)^2 ||r^v||^2.
inline EquilibriumResult saturated_equilibrium(const GameInstance& g,
                                               SaturatedMethod method = SaturatedMethod::active_set) {
  require(g.size() >= 1, "at least one slice is required");
  for (const auto& sl : g.slices) require(sl.target > 1.0, "normalized targets must exceed 1");
  const std::size_t V = g.size();
  const auto B = static_cast<Eigen::Index>(g.stations);
  EquilibriumResult res;
  std::vector<Vec> r(V);

  const auto qp = detail::joint_saturated_qp(g);
  QpSolution sol;
  switch (method) {
    case SaturatedMethod::active_set:
      sol = solve_qp(qp);
      for (std::size_t v = 0; v < V; ++v) r[v] = sol.z.segment(static_cast<Eigen::Index>(v) * B, B);
      break;
    case SaturatedMethod::block_coordinate:
      r = detail::saturated_block_coordinate(g, 1e-13, 100000);
      break;
    case SaturatedMethod::projected_gradient:
      r = detail::saturated_projected_gradient(g, 1e-13, 200000);
      break;
  }

  if (method == SaturatedMethod::active_set) {
    res.kkt_residual = qp_kkt_residual(qp, sol);
    res.zeta = Vec(static_cast<Eigen::Index>(V));
    Eigen::Index re = 0, ri = 0;
    for (std::size_t v = 0; v < V; ++v) {
      const auto& op = g.slices[v].op;
      res.zeta[static_cast<Eigen::Index>(v)] = -sol.eq_duals[re];
      res.chi.push_back(sol.ineq_duals.segment(ri, op.m.rows()));
      re += 1 + op.k.rows();
      ri += op.m.rows();
    }
  }

  Vec gagg = Vec::Zero(B);
  for (std::size_t v = 0; v < V; ++v) gagg += g.slices[v].share * r[v];
  StrategyProfile y(V);
  for (std::size_t v = 0; v < V; ++v) {
    const auto& sl = g.slices[v];
    y[v].relative = r[v];
    y[v].x = gagg.dot(r[v]) / (sl.share * (sl.target - 1.0));
  }
  for (std::size_t v = 0; v < V; ++v) {
    const auto& sl = g.slices[v];
    SliceEquilibrium se;
    se.relative = r[v];
    se.load = y[v].load();
    se.penalty = btd_penalty(g, y, v);
    se.admission = sl.op.admission(r[v], y[v].x);
    if (se.admission.size() > 0 && se.admission.maxCoeff() >= 1.0)
      res.warnings.push_back("slice " + std::to_string(v) +
                             ": saturated solution needs admission probability >= 1; arrivals too low for the "
                             "saturated regime");
    if (sl.share * sl.target > 1.0) {
      const auto ss = ss_optimal_policy(sl);
      se.relative_ss = ss.relative;
      se.load_ss = ss.load;
      se.gain = se.relative_ss.squaredNorm() / gagg.dot(r[v]) * (sl.share * (sl.target - 1.0)) /
                (sl.share * sl.target - 1.0);
    } else {
      se.gain = std::numeric_limits<double>::infinity();
      res.warnings.push_back("slice " + std::to_string(v) + ": target infeasible under static slicing");
    }
    res.slices.push_back(std::move(se));
  }
  res.converged = true;
  return res;
}

/// Static-slicing optimum in the saturated regime: the most balanced
/// admissible relative load, carrying (s d~ - 1) / ||r||^2.
inline SsPolicy ss_optimal_policy(const GameSlice& slice) {
  if (!(slice.share * slice.target > 1.0))
    fail(ErrorCode::infeasible_under_ss, "s * d~ = " + std::to_string(slice.share * slice.target) + " <= 1");
  const auto B = slice.op.m.cols();
  const Vec r = detail::project_gamma(slice.op, Vec::Zero(B));
  return {r, (slice.share * slice.target - 1.0) / r.squaredNorm()};
}

/// Static-slicing optimum at the slice's actual arrival rates: the smallest x
/// with min { ||r||^2 : r in P(x) } <= (s d~ - 1) x.
inline SsPolicy ss_policy(const GameSlice& slice) {
  if (!(slice.share * slice.target > 1.0))
    fail(ErrorCode::infeasible_under_ss, "s * d~ = " + std::to_string(slice.share * slice.target) + " <= 1");
  const double k = slice.share * slice.target - 1.0;
  const auto B = slice.op.m.cols();
  const Vec zero = Vec::Zero(B);
  const auto excess = [&](double x) {
    auto v = detail::shaped_value(slice.op, zero, 1.0, x);
    return std::pair{v.value - k * x, v.relative};
  };
  double lo = admit_all_x(slice.op);
  auto [e_lo, r_lo] = excess(lo);
  if (e_lo <= 0.0) return {r_lo, 1.0 / lo};
  double hi = 2.0 * lo;
  auto [e_hi, r_hi] = excess(hi);
  for (int i = 0; e_hi > 0.0; ++i) {
    if (i > 200) fail(ErrorCode::solver_stall, "SS policy: no feasible x found");
    lo = hi;
    hi *= 2.0;
    std::tie(e_hi, r_hi) = excess(hi);
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    auto [e, r] = excess(mid);
    if (e > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      r_hi = std::move(r);
    }
  }
  return {r_hi, 1.0 / hi};
}

/// Carried-load gain of the SCPF equilibrium over static slicing, per slice.
inline Vec load_gain(const EquilibriumResult& r) {
  Vec out(static_cast<Eigen::Index>(r.slices.size()));
  for (std::size_t v = 0; v < r.slices.size(); ++v) out[static_cast<Eigen::Index>(v)] = r.slices[v].gain;
  return out;
}

/// Closed form of the gain when every Gamma^v contains the uniform vector.
inline double uniform_load_gain(double share, double target) {
  require(share * target > 1.0, "s * d~ must exceed 1");
  return (share * target - share) / (share * target - 1.0);
}

}  // namespace scpf
