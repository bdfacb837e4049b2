#pragma once

// Network, slices and the stochastic traffic model: flow conservation and the
// load statistics every other module consumes.

#include "scpf/error.hpp"
#include "scpf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scpf {

inline constexpr double share_sum_tolerance = 1e-12;
inline constexpr double max_condition_number = 1e12;

enum class SojournKind { exponential, deterministic, lognormal };

/// Sojourn-time law at a station. Only the mean enters the analysis; the
/// shape is used by the event simulator.
struct SojournModel {
  SojournKind kind = SojournKind::exponential;
  double log_sigma = 0.5;  // lognormal only
};

enum class CapacityKind { deterministic, lognormal };

/// Law of the peak rate C_b^v. Both kinds are parameterized so that
/// E[1/C_b^v] = delta_b^v.
struct CapacityModel {
  CapacityKind kind = CapacityKind::deterministic;
  double log_sigma = 0.5;  // lognormal only
};

struct BaseStationSet {
  std::size_t count = 1;
};

struct SliceSpec {
  std::string name;
  double share = 1.0;
  Vec arrivals;   // gamma^v, per station
  Vec sojourn;    // mean sojourn mu^v, per station
  Mat routing;    // Q^v, substochastic
  Vec delta;      // E[1/C_b^v]
  std::optional<double> target;             // mean BTD target d_v
  std::optional<double> normalized_target;  // d_v / delta_v for the shaping game
  CapacityModel capacity;
  SojournModel sojourn_model;
  std::optional<std::size_t> population;  // closed-network mode in the simulators
};

namespace detail {

inline void check_routing(const Mat& q, std::size_t b, const std::string& who) {
  require(static_cast<std::size_t>(q.rows()) == b && static_cast<std::size_t>(q.cols()) == b,
          who + ": routing matrix must be B x B");
  require(q.allFinite() && q.minCoeff() >= 0.0, who + ": routing entries must be finite and >= 0");
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    require(q.row(i).sum() <= 1.0 + 1e-12, who + ": routing row sums must be <= 1");
}

}  // namespace detail

/// Immutable once built. Validation happens in the constructor.
class TrafficModel {
 public:
  TrafficModel(BaseStationSet stations, std::vector<SliceSpec> slices)
      : stations_(stations), slices_(std::move(slices)) {
    validate();
  }

  std::size_t stations() const noexcept { return stations_.count; }
  std::size_t size() const noexcept { return slices_.size(); }
  const std::vector<SliceSpec>& slices() const noexcept { return slices_; }
  const SliceSpec& slice(std::size_t v) const { return slices_.at(v); }

  std::vector<double> shares() const {
    std::vector<double> s;
    s.reserve(slices_.size());
    for (const auto& sl : slices_) s.push_back(sl.share);
    return s;
  }

 private:
  void validate() const {
    const std::size_t b = stations_.count;
    require(b >= 1, "at least one base station is required");
    require(!slices_.empty(), "at least one slice is required");
    double total = 0.0;
    for (std::size_t v = 0; v < slices_.size(); ++v) {
      const auto& sl = slices_[v];
      const std::string who = "slice " + std::to_string(v);
      require(sl.share > 0.0 && sl.share <= 1.0, who + ": share must lie in (0, 1]");
      total += sl.share;
      require(static_cast<std::size_t>(sl.arrivals.size()) == b, who + ": gamma must have length B");
      require(static_cast<std::size_t>(sl.sojourn.size()) == b, who + ": mu must have length B");
      require(static_cast<std::size_t>(sl.delta.size()) == b, who + ": delta must have length B");
      require(sl.arrivals.allFinite() && sl.arrivals.minCoeff() >= 0.0, who + ": gamma entries must be finite and >= 0");
      require(sl.sojourn.allFinite() && sl.sojourn.minCoeff() > 0.0, who + ": mu entries must be > 0");
      require(sl.delta.allFinite() && sl.delta.minCoeff() > 0.0, who + ": delta entries must be > 0");
      detail::check_routing(sl.routing, b, who);
      if (sl.target) require(*sl.target > 0.0, who + ": BTD target must be positive");
      if (sl.normalized_target) require(*sl.normalized_target > 0.0, who + ": normalized target must be positive");
    }
    require(std::abs(total - 1.0) <= share_sum_tolerance, "shares must sum to 1");
  }

  BaseStationSet stations_;
  std::vector<SliceSpec> slices_;
};

/// rho = diag(mu) (I - Q^T)^{-1} gamma, by dense LU with a condition check.
inline Vec solve_flow_conservation(const Vec& arrivals, const Mat& routing, const Vec& sojourn) {
  const auto b = arrivals.size();
  require(sojourn.size() == b, "mu must match gamma in length");
  require(sojourn.minCoeff() > 0.0, "mu entries must be > 0");
  detail::check_routing(routing, static_cast<std::size_t>(b), "flow conservation");

  const Mat system = Mat::Identity(b, b) - routing.transpose();
  Eigen::PartialPivLU<Mat> lu(system);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / max_condition_number))
    fail(ErrorCode::singular_routing,
         "I - Q^T is numerically singular (a routing class has no exit path)");

  Vec intensity = lu.solve(arrivals);
  // one step of refinement keeps the residual near machine precision
  intensity += lu.solve(arrivals - system * intensity);

  const double residual = (system * intensity - arrivals).cwiseAbs().maxCoeff();
  const double scale = 1.0 + (b > 0 ? arrivals.cwiseAbs().maxCoeff() : 0.0);
  if (!(residual <= 1e-10 * scale))
    fail(ErrorCode::singular_routing, "flow conservation residual too large");
  return sojourn.cwiseProduct(intensity);
}

/// Per-slice load statistics. `relative` is empty for a slice with zero load.
struct SliceLoad {
  double share = 0.0;
  Vec load;        // rho_b^v
  double total = 0.0;
  std::optional<Vec> relative;
  Vec idle_share;  // sbar_b^v
  Vec delta;
  CapacityModel capacity;

  bool has_relative() const noexcept { return relative.has_value(); }
};

struct LoadGeometry {
  double slice_norm;      // ||rho~^v||_Delta
  double aggregate_norm;  // ||g~||_Delta
  double angle_rad;
  double angle_deg;
};

class LoadProfile {
 public:
  /// Build directly from per-slice load vectors (no routing model needed).
  static LoadProfile from_loads(std::vector<double> shares, std::vector<Vec> loads, std::vector<Vec> deltas,
                                std::vector<CapacityModel> capacities = {}) {
    require(!shares.empty(), "at least one slice is required");
    require(loads.size() == shares.size() && deltas.size() == shares.size(),
            "shares, loads and deltas must have one entry per slice");
    if (capacities.empty()) capacities.resize(shares.size());
    require(capacities.size() == shares.size(), "one capacity model per slice");
    const auto b = loads.front().size();
    require(b >= 1, "at least one base station is required");

    double total_share = 0.0;
    LoadProfile p;
    p.slices_.resize(shares.size());
    for (std::size_t v = 0; v < shares.size(); ++v) {
      require(shares[v] > 0.0, "shares must be positive");
      require(loads[v].size() == b && deltas[v].size() == b, "load and delta vectors must have length B");
      require(loads[v].allFinite() && loads[v].minCoeff() >= 0.0, "loads must be finite and >= 0");
      require(deltas[v].allFinite() && deltas[v].minCoeff() > 0.0, "delta entries must be > 0");
      total_share += shares[v];
      auto& sl = p.slices_[v];
      sl.share = shares[v];
      sl.load = std::move(loads[v]);
      sl.total = sl.load.sum();
      sl.delta = std::move(deltas[v]);
      sl.capacity = capacities[v];
      if (sl.total > 0.0) {
        sl.relative = sl.load / sl.total;
      } else {
        p.warnings_.push_back(std::string(to_string(ErrorCode::zero_load_slice)) + ": slice " +
                              std::to_string(v) + " carries no load; its relative load is undefined");
      }
    }
    require(std::abs(total_share - 1.0) <= share_sum_tolerance, "shares must sum to 1");

    p.aggregate_ = Vec::Zero(b);
    p.active_aggregate_ = Vec::Zero(b);
    for (const auto& sl : p.slices_) {
      if (!sl.relative) continue;
      p.aggregate_ += sl.share * *sl.relative;
      p.active_aggregate_ += sl.share * (1.0 - std::exp(-sl.total)) * *sl.relative;
    }
    for (std::size_t v = 0; v < p.slices_.size(); ++v) {
      Vec idle = Vec::Zero(b);
      for (std::size_t u = 0; u < p.slices_.size(); ++u) {
        if (u == v) continue;
        idle += p.slices_[u].share * (-p.slices_[u].load.array()).exp().matrix();
      }
      p.slices_[v].idle_share = std::move(idle);
    }
    return p;
  }

  std::size_t size() const noexcept { return slices_.size(); }
  std::size_t stations() const noexcept { return static_cast<std::size_t>(aggregate_.size()); }
  const SliceLoad& slice(std::size_t v) const { return slices_.at(v); }
  const std::vector<SliceLoad>& slices() const noexcept { return slices_; }

  /// g~_b = sum_v s^v rho~_b^v
  const Vec& aggregate() const noexcept { return aggregate_; }
  /// g~'_b = sum_v s^v (1 - e^{-rho^v}) rho~_b^v
  const Vec& active_aggregate() const noexcept { return active_aggregate_; }

  const Vec& relative(std::size_t v) const {
    const auto& sl = slices_.at(v);
    if (!sl.relative)
      fail(ErrorCode::undefined_relative_load, "slice " + std::to_string(v) + " has zero load");
    return *sl.relative;
  }

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  std::vector<double> shares() const {
    std::vector<double> s;
    for (const auto& sl : slices_) s.push_back(sl.share);
    return s;
  }

  /// Same relative loads, slice v's total load replaced.
  LoadProfile with_total(std::size_t v, double total) const {
    require(total >= 0.0, "total load must be >= 0");
    auto loads = load_vectors();
    const Vec& rel = relative(v);
    loads.at(v) = rel * total;
    return rebuild(std::move(loads));
  }

  /// All slice loads multiplied by `factor`.
  LoadProfile scaled(double factor) const {
    require(factor >= 0.0, "scale factor must be >= 0");
    auto loads = load_vectors();
    for (auto& l : loads) l *= factor;
    return rebuild(std::move(loads));
  }

  std::vector<Vec> load_vectors() const {
    std::vector<Vec> out;
    for (const auto& sl : slices_) out.push_back(sl.load);
    return out;
  }

 private:
  LoadProfile rebuild(std::vector<Vec> loads) const {
    std::vector<Vec> deltas;
    std::vector<CapacityModel> caps;
    for (const auto& sl : slices_) {
      deltas.push_back(sl.delta);
      caps.push_back(sl.capacity);
    }
    return from_loads(shares(), std::move(loads), std::move(deltas), std::move(caps));
  }

  std::vector<SliceLoad> slices_;
  Vec aggregate_;
  Vec active_aggregate_;
  std::vector<std::string> warnings_;
};

inline LoadProfile derive_load_profile(const TrafficModel& model) {
  std::vector<Vec> loads;
  std::vector<Vec> deltas;
  std::vector<CapacityModel> caps;
  for (const auto& sl : model.slices()) {
    loads.push_back(solve_flow_conservation(sl.arrivals, sl.routing, sl.sojourn));
    deltas.push_back(sl.delta);
    caps.push_back(sl.capacity);
  }
  return LoadProfile::from_loads(model.shares(), std::move(loads), std::move(deltas), std::move(caps));
}

/// Routing on a rows x cols grid of stations with 4-neighbour moves and exit
/// probability `exit` per visit. With bias 0 every move is equally likely and
/// missing neighbours at the border become self-loops, so offered load is
/// uniform under uniform arrivals. With bias > 0 moves that get closer to
/// station `hot` carry weight 1 + bias.
inline Mat grid_routing(std::size_t rows, std::size_t cols, double exit, std::size_t hot = 0, double bias = 0.0) {
  require(rows >= 1 && cols >= 1, "grid needs at least one row and column");
  require(exit > 0.0 && exit <= 1.0, "exit probability must lie in (0, 1]");
  require(bias >= 0.0 && hot < rows * cols, "bias must be >= 0 and the hot station inside the grid");
  const auto B = static_cast<Eigen::Index>(rows * cols);
  Mat q = Mat::Zero(B, B);
  const auto hr = static_cast<long>(hot / cols), hc = static_cast<long>(hot % cols);
  const long dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  for (Eigen::Index b = 0; b < B; ++b) {
    const long r = static_cast<long>(b) / static_cast<long>(cols), c = static_cast<long>(b) % static_cast<long>(cols);
    std::vector<std::pair<Eigen::Index, double>> moves;
    for (int k = 0; k < 4; ++k) {
      const long rr = r + dr[k], cc = c + dc[k];
      if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
      const long d0 = std::abs(r - hr) + std::abs(c - hc), d1 = std::abs(rr - hr) + std::abs(cc - hc);
      moves.emplace_back(static_cast<Eigen::Index>(rr * static_cast<long>(cols) + cc), d1 < d0 ? 1.0 + bias : 1.0);
    }
    if (bias == 0.0) {
      for (const auto& [to, w] : moves) q(b, to) = (1.0 - exit) / 4.0;
      q(b, b) += (1.0 - exit) * static_cast<double>(4 - moves.size()) / 4.0;
    } else {
      double total = 0.0;
      for (const auto& m : moves) total += m.second;
      for (const auto& [to, w] : moves) q(b, to) = (1.0 - exit) * w / total;
    }
  }
  return q;
}

/// Delta-weighted norms of rho~^v and g~ and the angle between them.
inline LoadGeometry load_geometry(const LoadProfile& profile, std::size_t v) {
  const Vec& rel = profile.relative(v);
  const Vec& g = profile.aggregate();
  const Vec& w = profile.slice(v).delta;
  const double nr = std::sqrt(weighted_norm_sq(rel, w));
  const double ng = std::sqrt(weighted_norm_sq(g, w));
  if (!(nr > 0.0) || !(ng > 0.0)) fail(ErrorCode::zero_vector, "load geometry needs nonzero vectors");
  const double c = std::clamp(weighted_dot(g, rel, w) / (nr * ng), -1.0, 1.0);
  const double theta = std::acos(c);
  return {nr, ng, theta, theta * 180.0 / std::numbers::pi};
}

}  // namespace scpf
