#pragma once

// Product-form Monte Carlo: stationary snapshots with independent Poisson
// counts, a Palm (typical-user) BTD estimator and the brute-force check of the
// conditional count ratio.

#include "scpf/allocation.hpp"
#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/net_model.hpp"
#include "scpf/rng.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace scpf {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
};

inline McEstimate to_estimate(const MomentAccumulator& acc, std::uint64_t seed) {
  return {acc.mean(), acc.standard_error(), acc.count, seed};
}

/// Peak rate draw with E[1/C] = delta.
inline double sample_capacity(const CapacityModel& model, double delta, Rng& rng) {
  if (model.kind == CapacityKind::deterministic) return 1.0 / delta;
  const double sigma = model.log_sigma;
  std::normal_distribution<double> z(sigma * sigma / 2.0 - std::log(delta), sigma);
  return std::exp(z(rng));
}

inline Snapshot sample_stationary_snapshot(const LoadProfile& p, Rng& rng) {
  Snapshot snap(p.size(), p.stations());
  for (std::size_t v = 0; v < p.size(); ++v) {
    const auto& sl = p.slice(v);
    for (std::size_t b = 0; b < p.stations(); ++b) {
      const auto i = static_cast<Eigen::Index>(b);
      const double rho = sl.load[i];
      if (!(rho > 0.0)) continue;
      std::poisson_distribution<std::size_t> pois(rho);
      const std::size_t n = pois(rng);
      for (std::size_t k = 0; k < n; ++k) snap.add_user(v, b, sample_capacity(sl.capacity, sl.delta[i], rng));
    }
  }
  return snap;
}

namespace detail {

inline std::size_t draw_index(const Vec& weights, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  const auto n = static_cast<std::size_t>(weights.size());
  for (std::size_t b = 0; b + 1 < n; ++b) {
    x -= weights[static_cast<Eigen::Index>(b)];
    if (x < 0.0) return b;
  }
  // guard against round-off: the last station with positive weight
  for (std::size_t b = n; b-- > 0;)
    if (weights[static_cast<Eigen::Index>(b)] > 0.0) return b;
  return n - 1;
}

// One typical-user draw: counts from the stationary law, plus the tagged user.
// Only the counts matter for the tagged user's fraction, so the other users'
// capacities are not sampled.
inline double palm_sample(const LoadProfile& p, std::size_t v, Scheme scheme, std::span<const double> shares,
                          std::vector<std::size_t>& counts, std::vector<std::size_t>& totals, Rng& rng) {
  const std::size_t V = p.size(), B = p.stations();
  const std::size_t b = draw_index(p.relative(v), rng);
  std::fill(totals.begin(), totals.end(), 0);
  for (std::size_t u = 0; u < V; ++u) {
    const auto& load = p.slice(u).load;
    for (std::size_t c = 0; c < B; ++c) {
      const double rho = load[static_cast<Eigen::Index>(c)];
      std::size_t n = 0;
      if (rho > 0.0) n = std::poisson_distribution<std::size_t>(rho)(rng);
      counts[u * B + c] = n;
      totals[u] += n;
    }
  }
  ++counts[v * B + b];
  ++totals[v];
  const auto count = [&](std::size_t u, std::size_t c) { return counts[u * B + c]; };
  const double f = cell_fraction(count, V, shares, totals, scheme, v, b);
  const auto& sl = p.slice(v);
  const double cap = sample_capacity(sl.capacity, sl.delta[static_cast<Eigen::Index>(b)], rng);
  return 1.0 / (f * cap);
}

}  // namespace detail

/// Mean of 1/r for a typical slice-v user under `scheme`.
inline McEstimate palm_estimate_btd(const LoadProfile& p, std::size_t v, Scheme scheme, std::size_t reps,
                                    std::uint64_t seed, unsigned threads = 1) {
  require(reps > 0, "reps must be positive");
  (void)p.relative(v);
  const auto shares = p.shares();
  const auto acc = run_blocks(reps, seed, threads, [&](Rng& rng, std::size_t n) {
    std::vector<std::size_t> counts(p.size() * p.stations()), totals(p.size());
    MomentAccumulator a;
    for (std::size_t k = 0; k < n; ++k) a.add(detail::palm_sample(p, v, scheme, shares, counts, totals, rng));
    return a;
  });
  return to_estimate(acc, seed);
}

/// E[N_i / sum_j N_j | sum_j N_j > 0] for independent N_j ~ Poisson(rho_j).
/// `reps` counts accepted (nonzero-sum) draws.
inline McEstimate conditional_ratio_oracle(std::span<const double> rho, std::size_t i, std::size_t reps,
                                           std::uint64_t seed, unsigned threads = 1) {
  require(i < rho.size(), "index out of range");
  require(reps > 0, "reps must be positive");
  bool any = false;
  for (double r : rho) {
    require(r >= 0.0 && std::isfinite(r), "rates must be finite and >= 0");
    any = any || r > 0.0;
  }
  if (!any) fail(ErrorCode::all_zero, "every Poisson mean is zero");
  const std::vector<double> rates(rho.begin(), rho.end());
  const auto acc = run_blocks(reps, seed, threads, [&](Rng& rng, std::size_t n) {
    std::vector<std::poisson_distribution<long>> dists;
    for (double r : rates) dists.emplace_back(r > 0.0 ? r : 1.0);
    MomentAccumulator a;
    while (a.count < n) {
      long total = 0, mine = 0;
      for (std::size_t j = 0; j < rates.size(); ++j) {
        const long x = rates[j] > 0.0 ? dists[j](rng) : 0;
        total += x;
        if (j == i) mine = x;
      }
      if (total > 0) a.add(static_cast<double>(mine) / static_cast<double>(total));
    }
    return a;
  });
  return to_estimate(acc, seed);
}

}  // namespace scpf
