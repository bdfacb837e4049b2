#pragma once

// Per-user instantaneous rates for one network snapshot under static slicing
// (SS), general processor sharing (GPS) and share-constrained proportional
// fairness (SCPF).

#include "scpf/error.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace scpf {

enum class Scheme { scpf, ss, gps };

inline constexpr Scheme all_schemes[] = {Scheme::scpf, Scheme::ss, Scheme::gps};

constexpr std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::scpf: return "SCPF";
    case Scheme::ss: return "SS";
    case Scheme::gps: return "GPS";
  }
  return "?";
}

/// User counts and per-user peak rates for every (slice, station) cell.
class Snapshot {
 public:
  Snapshot(std::size_t slices, std::size_t stations)
      : slices_(slices), stations_(stations), cells_(slices * stations) {}

  std::size_t slices() const noexcept { return slices_; }
  std::size_t stations() const noexcept { return stations_; }

  void add_user(std::size_t v, std::size_t b, double capacity) {
    require(capacity > 0.0, "user capacity must be positive");
    cell(v, b).push_back(capacity);
  }

  std::vector<double>& cell(std::size_t v, std::size_t b) { return cells_.at(v * stations_ + b); }
  const std::vector<double>& cell(std::size_t v, std::size_t b) const { return cells_.at(v * stations_ + b); }

  std::size_t count(std::size_t v, std::size_t b) const { return cell(v, b).size(); }

  std::size_t slice_total(std::size_t v) const {
    std::size_t n = 0;
    for (std::size_t b = 0; b < stations_; ++b) n += count(v, b);
    return n;
  }

  std::size_t users() const {
    std::size_t n = 0;
    for (const auto& c : cells_) n += c.size();
    return n;
  }

 private:
  std::size_t slices_;
  std::size_t stations_;
  std::vector<std::vector<double>> cells_;
};

struct UserRate {
  double rate;
  double fraction;
};

/// Rates grouped like the snapshot: cell(v, b)[i] belongs to the i-th user of
/// slice v at station b.
class RateAllocation {
 public:
  RateAllocation(std::size_t slices, std::size_t stations)
      : slices_(slices), stations_(stations), cells_(slices * stations) {}

  std::vector<UserRate>& cell(std::size_t v, std::size_t b) { return cells_.at(v * stations_ + b); }
  const std::vector<UserRate>& cell(std::size_t v, std::size_t b) const { return cells_.at(v * stations_ + b); }

  double station_fraction(std::size_t b) const {
    double f = 0.0;
    for (std::size_t v = 0; v < slices_; ++v)
      for (const auto& u : cell(v, b)) f += u.fraction;
    return f;
  }

  double slice_fraction(std::size_t v, std::size_t b) const {
    double f = 0.0;
    for (const auto& u : cell(v, b)) f += u.fraction;
    return f;
  }

 private:
  std::size_t slices_;
  std::size_t stations_;
  std::vector<std::vector<UserRate>> cells_;
};

namespace detail {

inline void check_shares(const Snapshot& snap, std::span<const double> shares) {
  require(shares.size() == snap.slices(), "one share per slice is required");
  for (double s : shares) require(s > 0.0, "shares must be positive");
}

// Resource fraction of one user of slice v at station b. `count(u, b)` gives
// n_b^u and `totals` the network-wide user count of every slice.
template <class CountFn>
double cell_fraction(CountFn&& count, std::size_t slices, std::span<const double> shares,
                     std::span<const std::size_t> totals, Scheme scheme, std::size_t v, std::size_t b) {
  const auto n_vb = static_cast<double>(count(v, b));
  switch (scheme) {
    case Scheme::ss:
      return shares[v] / n_vb;
    case Scheme::gps: {
      double active = 0.0;
      for (std::size_t u = 0; u < slices; ++u)
        if (count(u, b) > 0) active += shares[u];
      return shares[v] / (n_vb * active);
    }
    case Scheme::scpf: {
      double weight_sum = 0.0;
      for (std::size_t u = 0; u < slices; ++u) {
        const auto n_ub = count(u, b);
        if (n_ub > 0) weight_sum += static_cast<double>(n_ub) * shares[u] / static_cast<double>(totals[u]);
      }
      return (shares[v] / static_cast<double>(totals[v])) / weight_sum;
    }
  }
  return 0.0;
}

inline double user_fraction(const Snapshot& snap, std::span<const double> shares,
                            std::span<const std::size_t> totals, Scheme scheme, std::size_t v,
                            std::size_t b) {
  return cell_fraction([&](std::size_t u, std::size_t c) { return snap.count(u, c); }, snap.slices(), shares,
                       totals, scheme, v, b);
}

inline std::vector<std::size_t> slice_totals(const Snapshot& snap) {
  std::vector<std::size_t> totals(snap.slices());
  for (std::size_t v = 0; v < snap.slices(); ++v) totals[v] = snap.slice_total(v);
  return totals;
}

}  // namespace detail

inline RateAllocation allocate(const Snapshot& snap, std::span<const double> shares, Scheme scheme) {
  detail::check_shares(snap, shares);
  const auto totals = detail::slice_totals(snap);
  RateAllocation out(snap.slices(), snap.stations());
  for (std::size_t v = 0; v < snap.slices(); ++v) {
    for (std::size_t b = 0; b < snap.stations(); ++b) {
      const auto& caps = snap.cell(v, b);
      if (caps.empty()) continue;
      const double f = detail::user_fraction(snap, shares, totals, scheme, v, b);
      auto& dst = out.cell(v, b);
      dst.reserve(caps.size());
      for (double c : caps) dst.push_back({f * c, f});
    }
  }
  return out;
}

inline RateAllocation rates_ss(const Snapshot& snap, std::span<const double> shares) {
  return allocate(snap, shares, Scheme::ss);
}
inline RateAllocation rates_gps(const Snapshot& snap, std::span<const double> shares) {
  return allocate(snap, shares, Scheme::gps);
}
inline RateAllocation rates_scpf(const Snapshot& snap, std::span<const double> shares) {
  return allocate(snap, shares, Scheme::scpf);
}

/// Rate of the i-th user of slice v at station b without materializing the
/// whole allocation. Used by the Monte Carlo estimators.
inline double user_rate(const Snapshot& snap, std::span<const double> shares, Scheme scheme, std::size_t v,
                        std::size_t b, std::size_t i) {
  detail::check_shares(snap, shares);
  const auto& caps = snap.cell(v, b);
  require(i < caps.size(), "user index out of range");
  const auto totals = detail::slice_totals(snap);
  return detail::user_fraction(snap, shares, totals, scheme, v, b) * caps[i];
}

}  // namespace scpf
