#pragma once

// Shared fixtures and small random generators for the unit tests.

#include "scpf/net_model.hpp"
#include "scpf/rng.hpp"

#include <random>
#include <string>
#include <vector>

namespace scpf::testing {

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Point on the open simplex, bounded away from zero.
inline std::vector<double> random_shares(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  double sum = 0.0;
  for (auto& x : s) sum += (x = uniform(rng, 0.1, 1.0));
  for (auto& x : s) x /= sum;
  // push round-off into the last entry so the shares sum to 1 exactly enough
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) head += s[i];
  s.back() = 1.0 - head;
  return s;
}

/// Nonnegative load vector; with probability `sparse` each entry is zero, but
/// at least one entry stays positive.
inline Vec random_load(Rng& rng, std::size_t b, double scale, double sparse = 0.3) {
  Vec v(static_cast<Eigen::Index>(b));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = uniform(rng, 0.0, 1.0) < sparse ? 0.0 : uniform(rng, 0.05, 1.0) * scale;
  if (v.maxCoeff() <= 0.0) v[static_cast<Eigen::Index>(pick(rng, 0, b - 1))] = scale;
  return v;
}

inline Vec random_delta(Rng& rng, std::size_t b) {
  Vec d(static_cast<Eigen::Index>(b));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = uniform(rng, 0.3, 3.0);
  return d;
}

struct RandomInstance {
  LoadProfile profile;
  std::size_t slices;
  std::size_t stations;
};

inline RandomInstance random_profile(Rng& rng, std::size_t max_v = 4, std::size_t max_b = 6, double max_load = 5.0) {
  const std::size_t V = pick(rng, 1, max_v), B = pick(rng, 1, max_b);
  std::vector<Vec> loads, deltas;
  for (std::size_t v = 0; v < V; ++v) {
    loads.push_back(random_load(rng, B, uniform(rng, 0.1, max_load)));
    deltas.push_back(random_delta(rng, B));
  }
  return {LoadProfile::from_loads(random_shares(rng, V), loads, deltas), V, B};
}

/// Random substochastic routing matrix whose rows sum to at most 1 - min_exit.
inline Mat random_routing(Rng& rng, std::size_t b, double min_exit = 0.1) {
  Mat q(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < q.cols(); ++j) sum += (q(i, j) = uniform(rng, 0.0, 1.0));
    q.row(i) *= uniform(rng, 0.0, 1.0 - min_exit) / sum;
  }
  return q;
}

inline std::string source_path(const std::string& rel) { return std::string(SCPF_SOURCE_DIR) + "/" + rel; }

}  // namespace scpf::testing
