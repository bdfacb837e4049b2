#pragma once

// Closed-form mean bit transmission delay (BTD) seen by a typical user of a
// slice, and the SCPF gains over SS and GPS derived from them.

#include "scpf/allocation.hpp"
#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/net_model.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace scpf {

inline constexpr double degenerate_denominator = 1e-300;

namespace detail {

inline double guarded_ratio(double num, double den, const char* what) {
  if (!(std::abs(den) >= degenerate_denominator))
    fail(ErrorCode::degenerate_geometry, std::string(what) + ": denominator vanishes");
  return num / den;
}

// g~' without slice v's own term: the rho^v -> 0 limit of g~'.
inline Vec active_aggregate_without(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  return p.active_aggregate() - sl.share * (1.0 - std::exp(-sl.total)) * p.relative(v);
}

}  // namespace detail

/// Mean BTD of a typical slice-v user attached to station b.
inline double station_btd(const LoadProfile& p, std::size_t v, std::size_t b, Scheme scheme) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  const auto i = static_cast<Eigen::Index>(b);
  const double s = sl.share;
  switch (scheme) {
    case Scheme::scpf:
      return sl.delta[i] * (1.0 - rel[i] +
                            (sl.total + 1.0) * (p.active_aggregate()[i] / s + std::exp(-sl.total) * rel[i]));
    case Scheme::ss:
      return sl.delta[i] * (sl.load[i] + 1.0) / s;
    case Scheme::gps:
      return sl.delta[i] * (sl.load[i] + 1.0) / s * (1.0 - sl.idle_share[i]);
  }
  return 0.0;
}

inline double mean_btd(const LoadProfile& p, std::size_t v, Scheme scheme) {
  const Vec& rel = p.relative(v);
  double acc = 0.0;
  for (std::size_t b = 0; b < p.stations(); ++b) {
    const double w = rel[static_cast<Eigen::Index>(b)];
    if (w > 0.0) acc += w * station_btd(p, v, b, scheme);
  }
  return acc;
}

inline double mean_btd_scpf(const LoadProfile& p, std::size_t v) { return mean_btd(p, v, Scheme::scpf); }
inline double mean_btd_ss(const LoadProfile& p, std::size_t v) { return mean_btd(p, v, Scheme::ss); }
inline double mean_btd_gps(const LoadProfile& p, std::size_t v) { return mean_btd(p, v, Scheme::gps); }

/// Leading term (rho^v / s^v) <rho~^v, g~>_Delta of the SCPF mean BTD for
/// large loads. The O(1) remainder is dropped.
inline double mean_btd_scpf_asymptotic(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  return sl.total / sl.share * weighted_dot(p.relative(v), p.aggregate(), sl.delta);
}

inline double gain_ss(const LoadProfile& p, std::size_t v) {
  return detail::guarded_ratio(mean_btd_ss(p, v), mean_btd_scpf(p, v), "gain_ss");
}

inline double gain_gps(const LoadProfile& p, std::size_t v) {
  return detail::guarded_ratio(mean_btd_gps(p, v), mean_btd_scpf(p, v), "gain_gps");
}

// Shared denominator of the two closed-form gain expressions:
// s<delta,rho~> - s(1 - (rho+1)e^{-rho}) ||rho~||^2_Delta + (rho+1)<g~',rho~>_Delta
inline double scpf_gain_denominator(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  const double rho = sl.total;
  return sl.share * rel.dot(sl.delta) -
         sl.share * (1.0 - (rho + 1.0) * std::exp(-rho)) * weighted_norm_sq(rel, sl.delta) +
         (rho + 1.0) * weighted_dot(p.active_aggregate(), rel, sl.delta);
}

/// SCPF-over-SS gain evaluated from norms and inner products rather than as a
/// ratio of the two mean BTDs.
inline double gain_ss_closed_form(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  const double num = sl.total * weighted_norm_sq(rel, sl.delta) + rel.dot(sl.delta);
  return detail::guarded_ratio(num, scpf_gain_denominator(p, v), "gain_ss_closed_form");
}

inline double gain_gps_closed_form(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  const Vec ds = sl.delta.cwiseProduct(sl.idle_share);
  const Vec busy = Vec::Ones(rel.size()) - sl.idle_share;
  const double num = sl.total * (weighted_norm_sq(rel, sl.delta) - weighted_norm_sq(rel, ds)) +
                     weighted_dot(rel, busy, sl.delta);
  return detail::guarded_ratio(num, scpf_gain_denominator(p, v), "gain_gps_closed_form");
}

struct GainLimits {
  double ss_light;
  double ss_heavy;
  double gps_light;
  double gps_heavy;
};

/// Light forms are the rho^v -> 0 limits with the other slices' loads held
/// fixed (slice v's own term drops out of g~'). Heavy forms are evaluated on
/// the relative loads and idle shares of the supplied profile.
inline GainLimits gain_limits(const LoadProfile& p, std::size_t v) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  const Vec others = detail::active_aggregate_without(p, v);
  const double mean_delta = rel.dot(sl.delta);
  const double light_den = sl.share * mean_delta + weighted_dot(others, rel, sl.delta);
  const double heavy_den = weighted_dot(p.aggregate(), rel, sl.delta);
  const double norm_sq = weighted_norm_sq(rel, sl.delta);
  const Vec ds = sl.delta.cwiseProduct(sl.idle_share);
  const Vec busy = Vec::Ones(rel.size()) - sl.idle_share;

  GainLimits g{};
  g.ss_light = detail::guarded_ratio(mean_delta, light_den, "G^{SS,L}");
  g.ss_heavy = detail::guarded_ratio(norm_sq, heavy_den, "G^{SS,H}");
  g.gps_light = detail::guarded_ratio(weighted_dot(rel, busy, sl.delta), light_den, "G^{GPS,L}");
  g.gps_heavy = detail::guarded_ratio(norm_sq - weighted_norm_sq(rel, ds), heavy_den, "G^{GPS,H}");
  return g;
}

/// Heavy-load gain over SS under homogeneous capacities, from the two norms
/// and the angle between the slice and aggregate relative loads.
inline double gain_ss_heavy_from_geometry(double slice_norm, double aggregate_norm, double angle_deg) {
  const double c = std::cos(angle_deg * std::numbers::pi / 180.0);
  return detail::guarded_ratio(slice_norm, aggregate_norm * c, "G^{SS,H} from geometry");
}

/// Capacity- and share-normalized BTD: sum_b rho~_b (s / (delta_b rho)) E[1/R_b].
inline double normalized_btd(const LoadProfile& p, std::size_t v, Scheme scheme) {
  const auto& sl = p.slice(v);
  const Vec& rel = p.relative(v);
  double acc = 0.0;
  for (std::size_t b = 0; b < p.stations(); ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    if (rel[i] > 0.0) acc += rel[i] * sl.share / (sl.delta[i] * sl.total) * station_btd(p, v, b, scheme);
  }
  return acc;
}

struct OverallGains {
  double ss;
  double gps;
  double ss_heavy;
  double gps_heavy;
};

inline OverallGains overall_gains(const LoadProfile& p) {
  double scpf = 0.0, ss = 0.0, gps = 0.0;
  double heavy_den = 0.0, heavy_ss = 0.0, heavy_gps = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    const auto& sl = p.slice(v);
    const Vec& rel = p.relative(v);
    scpf += sl.share * normalized_btd(p, v, Scheme::scpf);
    ss += sl.share * normalized_btd(p, v, Scheme::ss);
    gps += sl.share * normalized_btd(p, v, Scheme::gps);
    heavy_den += sl.share * rel.dot(p.aggregate());
    heavy_ss += sl.share * rel.squaredNorm();
    heavy_gps += sl.share * weighted_norm_sq(rel, Vec::Ones(rel.size()) - sl.idle_share);
  }
  return {detail::guarded_ratio(ss, scpf, "G_all^SS"), detail::guarded_ratio(gps, scpf, "G_all^GPS"),
          detail::guarded_ratio(heavy_ss, heavy_den, "G_all^{SS,H}"),
          detail::guarded_ratio(heavy_gps, heavy_den, "G_all^{GPS,H}")};
}

struct SliceBtd {
  double btd[3];             // indexed by Scheme
  double normalized_btd[3];  // indexed by Scheme
  double gain_ss;
  double gain_gps;
  GainLimits limits;
};

struct BtdReport {
  std::vector<SliceBtd> slices;
  OverallGains overall;
};

inline BtdReport btd_report(const LoadProfile& p) {
  BtdReport r;
  for (std::size_t v = 0; v < p.size(); ++v) {
    SliceBtd s{};
    for (Scheme sc : all_schemes) {
      s.btd[static_cast<int>(sc)] = mean_btd(p, v, sc);
      s.normalized_btd[static_cast<int>(sc)] = normalized_btd(p, v, sc);
    }
    s.gain_ss = gain_ss(p, v);
    s.gain_gps = gain_gps(p, v);
    s.limits = gain_limits(p, v);
    r.slices.push_back(s);
  }
  r.overall = overall_gains(p);
  return r;
}

}  // namespace scpf
