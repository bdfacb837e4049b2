#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace scpf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// <x, y>_W with W = diag(w).
inline double weighted_dot(const Vec& x, const Vec& y, const Vec& w) {
  return (x.array() * w.array() * y.array()).sum();
}

inline double weighted_norm_sq(const Vec& x, const Vec& w) { return weighted_dot(x, x, w); }

inline Vec to_vec(std::span<const double> values) {
  Vec out(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Eigen::Index>(i)] = values[i];
  return out;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace scpf
