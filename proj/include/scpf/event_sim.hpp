#pragma once

// Event-driven simulation of the multi-class M/GI/infinity network: Poisson
// exogenous arrivals, per-station sojourns, Markov routing between stations.
// A slice with a fixed population runs closed: users that exit re-enter at a
// station drawn from the arrival profile.

#include "scpf/allocation.hpp"
#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/mc_sim.hpp"
#include "scpf/net_model.hpp"
#include "scpf/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <queue>
#include <random>
#include <utility>
#include <vector>

namespace scpf {

struct EventSimOptions {
  double horizon = 1000.0;
  double warmup_fraction = 0.2;
  std::size_t min_samples = 30;
  double sample_spacing = 0.0;      // 0: three mean system times of the slowest slice
  double tag_probability = 0.0;     // each arriving user is tagged independently; tagged users' BTD is recorded
  double btd_interval = 1.0;
  bool record_events = false;
  std::uint64_t seed = 1;
};

enum class EventKind { arrival, handoff, departure };

struct TraceEvent {
  double time;
  EventKind kind;
  std::size_t slice;
  std::size_t station;  // station entered (arrival, handoff) or left (departure)
  std::size_t user;
};

struct BtdSample {
  double time;
  std::size_t slice;
  std::size_t station;
  std::size_t user;
  Scheme scheme;
  double btd;
};

struct EventTrace {
  std::size_t slices = 0;
  std::size_t stations = 0;
  double horizon = 0.0;
  double warmup = 0.0;
  std::vector<TraceEvent> events;
  std::vector<BtdSample> btd;
  Mat mean_counts;  // V x B, time average after warm-up
  std::vector<std::vector<std::size_t>> count_samples;  // [v * B + b], spaced snapshots
  std::size_t arrivals = 0;
  std::size_t departures = 0;
  std::size_t in_system = 0;

  const std::vector<std::size_t>& samples(std::size_t v, std::size_t b) const {
    return count_samples.at(v * stations + b);
  }

  std::vector<std::size_t> histogram(std::size_t v, std::size_t b) const {
    std::vector<std::size_t> h;
    for (std::size_t n : samples(v, b)) {
      if (n >= h.size()) h.resize(n + 1, 0);
      ++h[n];
    }
    return h;
  }

  std::vector<double> btd_series(std::size_t v, Scheme scheme) const {
    std::vector<double> out;
    for (const auto& s : btd)
      if (s.slice == v && s.scheme == scheme) out.push_back(s.btd);
    return out;
  }
};

inline void write_btd_csv(const EventTrace& trace, std::ostream& os) {
  os << "time,slice,station,user_id,scheme,btd\n";
  for (const auto& s : trace.btd)
    os << s.time << ',' << s.slice << ',' << s.station << ',' << s.user << ',' << to_string(s.scheme) << ','
       << s.btd << '\n';
}

namespace detail {

inline Vec entry_distribution(const SliceSpec& sl) {
  const double total = sl.arrivals.sum();
  if (total > 0.0) return sl.arrivals / total;
  return Vec::Constant(sl.arrivals.size(), 1.0 / static_cast<double>(sl.arrivals.size()));
}

inline double sample_sojourn(const SojournModel& m, double mean, Rng& rng) {
  switch (m.kind) {
    case SojournKind::exponential:
      return std::exponential_distribution<double>(1.0 / mean)(rng);
    case SojournKind::deterministic:
      return mean;
    case SojournKind::lognormal: {
      const double s = m.log_sigma;
      return std::exp(std::normal_distribution<double>(std::log(mean) - s * s / 2.0, s)(rng));
    }
  }
  return mean;
}

// Next station from row `from` of Q, or B for an exit.
inline std::size_t route(const Mat& q, std::size_t from, Rng& rng) {
  double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto B = static_cast<std::size_t>(q.cols());
  for (std::size_t c = 0; c < B; ++c) {
    x -= q(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(c));
    if (x < 0.0) return c;
  }
  return B;
}

}  // namespace detail

/// Mean time a user spends in the network per entry.
inline double mean_system_time(const SliceSpec& sl) {
  return solve_flow_conservation(detail::entry_distribution(sl), sl.routing, sl.sojourn).sum();
}

/// Mean occupancy of a closed slice with `population` independent users:
/// the embedded jump chain's stationary law weighted by mean sojourns.
inline Vec closed_mean_occupancy(const SliceSpec& sl, std::size_t population) {
  const auto B = sl.arrivals.size();
  const Vec entry = detail::entry_distribution(sl);
  Mat p = sl.routing;
  for (Eigen::Index b = 0; b < B; ++b) p.row(b) += (1.0 - sl.routing.row(b).sum()) * entry.transpose();
  // pi (P - I) = 0 with sum(pi) = 1
  Mat a(B + 1, B);
  a.topRows(B) = (p - Mat::Identity(B, B)).transpose();
  a.row(B).setOnes();
  Vec rhs = Vec::Zero(B + 1);
  rhs[B] = 1.0;
  const Vec pi = a.colPivHouseholderQr().solve(rhs);
  const Vec w = pi.cwiseProduct(sl.sojourn);
  return static_cast<double>(population) * w / w.sum();
}

inline EventTrace run_event_sim(const TrafficModel& model, const EventSimOptions& opt) {
  require(opt.horizon > 0.0, "horizon must be positive");
  require(opt.warmup_fraction >= 0.0 && opt.warmup_fraction < 1.0, "warm-up fraction must lie in [0, 1)");
  require(opt.btd_interval > 0.0, "BTD sampling interval must be positive");

  const std::size_t V = model.size(), B = model.stations();
  const auto shares = model.shares();
  Rng rng = make_stream(opt.seed, 0);

  double spacing = opt.sample_spacing;
  if (spacing <= 0.0) {
    double t = 0.0;
    for (const auto& sl : model.slices()) t = std::max(t, mean_system_time(sl));
    spacing = 3.0 * t;
  }

  EventTrace tr;
  tr.slices = V;
  tr.stations = B;
  tr.horizon = opt.horizon;
  tr.warmup = opt.warmup_fraction * opt.horizon;
  tr.count_samples.assign(V * B, {});
  const double warm = tr.warmup;

  struct User {
    std::size_t slice, station, id;
    double capacity;
    bool alive;
    bool tagged;
  };
  std::vector<User> users;
  std::vector<std::size_t> free_slots;
  std::vector<std::size_t> counts(V * B, 0), totals(V, 0);
  std::vector<double> area(V * B, 0.0), last_change(V * B, 0.0);
  std::size_t next_id = 0;

  // Tagging draws come from their own stream so that they do not perturb the
  // trajectory. Independent thinning keeps tagged users typical: a rule such
  // as "tag the next arrival once a slot frees up" favours arrivals that
  // follow a departure and biases the BTD downwards.
  Rng tag_rng = make_stream(opt.seed, 1);
  std::bernoulli_distribution tag_draw(opt.tag_probability);

  enum class Kind { exogenous, leave, count_sample, btd_sample };
  struct Item {
    double time;
    std::uint64_t seq;
    Kind kind;
    std::size_t who;  // slice for exogenous, user slot for leave
  };
  const auto later = [](const Item& a, const Item& b) { return a.time != b.time ? a.time > b.time : a.seq > b.seq; };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> queue(later);
  std::uint64_t seq = 0;
  const auto push = [&](double t, Kind k, std::size_t who) { queue.push({t, seq++, k, who}); };

  const auto touch = [&](std::size_t cell, double t) {
    if (t > warm) area[cell] += static_cast<double>(counts[cell]) * (t - std::max(last_change[cell], warm));
    last_change[cell] = t;
  };

  const auto capacity_at = [&](std::size_t v, std::size_t b) {
    const auto& sl = model.slice(v);
    return sample_capacity(sl.capacity, sl.delta[static_cast<Eigen::Index>(b)], rng);
  };

  const auto enter = [&](std::size_t slot, std::size_t b, double t) {
    auto& u = users[slot];
    const std::size_t cell = u.slice * B + b;
    touch(cell, t);
    ++counts[cell];
    u.station = b;
    u.capacity = capacity_at(u.slice, b);
    const auto& sl = model.slice(u.slice);
    push(t + detail::sample_sojourn(sl.sojourn_model, sl.sojourn[static_cast<Eigen::Index>(b)], rng), Kind::leave,
         slot);
  };

  const auto spawn = [&](std::size_t v, std::size_t b, double t) {
    std::size_t slot;
    if (!free_slots.empty()) {
      slot = free_slots.back();
      free_slots.pop_back();
      users[slot] = {v, b, next_id++, 0.0, true, tag_draw(tag_rng)};
    } else {
      slot = users.size();
      users.push_back({v, b, next_id++, 0.0, true, tag_draw(tag_rng)});
    }
    ++totals[v];
    ++tr.arrivals;
    if (opt.record_events) tr.events.push_back({t, EventKind::arrival, v, b, users[slot].id});
    enter(slot, b, t);
  };

  std::vector<Vec> entry(V);
  for (std::size_t v = 0; v < V; ++v) {
    const auto& sl = model.slice(v);
    entry[v] = detail::entry_distribution(sl);
    if (sl.population) {
      for (std::size_t k = 0; k < *sl.population; ++k) spawn(v, detail::draw_index(entry[v], rng), 0.0);
    } else if (sl.arrivals.sum() > 0.0) {
      push(std::exponential_distribution<double>(sl.arrivals.sum())(rng), Kind::exogenous, v);
    }
  }
  for (double t = warm; t <= opt.horizon; t += spacing) push(t, Kind::count_sample, 0);
  if (opt.tag_probability > 0.0)
    for (double t = warm; t <= opt.horizon; t += opt.btd_interval) push(t, Kind::btd_sample, 0);

  const auto fraction = [&](std::size_t v, std::size_t b, Scheme scheme) {
    const auto count = [&](std::size_t u, std::size_t c) { return counts[u * B + c]; };
    return detail::cell_fraction(count, V, shares, totals, scheme, v, b);
  };

  while (!queue.empty() && queue.top().time <= opt.horizon) {
    const Item it = queue.top();
    queue.pop();
    const double t = it.time;
    switch (it.kind) {
      case Kind::exogenous: {
        const std::size_t v = it.who;
        spawn(v, detail::draw_index(entry[v], rng), t);
        push(t + std::exponential_distribution<double>(model.slice(v).arrivals.sum())(rng), Kind::exogenous, v);
        break;
      }
      case Kind::leave: {
        auto& u = users[it.who];
        const std::size_t v = u.slice, b = u.station;
        const std::size_t cell = v * B + b;
        touch(cell, t);
        --counts[cell];
        const auto& sl = model.slice(v);
        const std::size_t next = detail::route(sl.routing, b, rng);
        if (next < B) {
          if (opt.record_events) tr.events.push_back({t, EventKind::handoff, v, next, u.id});
          enter(it.who, next, t);
        } else {
          ++tr.departures;
          if (opt.record_events) tr.events.push_back({t, EventKind::departure, v, b, u.id});
          if (sl.population) {
            ++tr.arrivals;
            u.id = next_id++;
            u.tagged = tag_draw(tag_rng);
            const std::size_t again = detail::draw_index(entry[v], rng);
            if (opt.record_events) tr.events.push_back({t, EventKind::arrival, v, again, u.id});
            enter(it.who, again, t);
          } else {
            --totals[v];
            u.alive = false;
            free_slots.push_back(it.who);
          }
        }
        break;
      }
      case Kind::count_sample:
        for (std::size_t c = 0; c < V * B; ++c) tr.count_samples[c].push_back(counts[c]);
        break;
      case Kind::btd_sample:
        for (const auto& u : users) {
          if (!u.alive || !u.tagged) continue;
          for (Scheme sc : all_schemes)
            tr.btd.push_back({t, u.slice, u.station, u.id, sc, 1.0 / (fraction(u.slice, u.station, sc) * u.capacity)});
        }
        break;
    }
  }

  tr.mean_counts = Mat::Zero(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(B));
  const double span = opt.horizon - warm;
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t cell = v * B + b;
      touch(cell, opt.horizon);
      tr.mean_counts(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b)) = area[cell] / span;
    }
  for (std::size_t v = 0; v < V; ++v) tr.in_system += totals[v];

  if (tr.count_samples.empty() || tr.count_samples.front().size() < opt.min_samples)
    fail(ErrorCode::horizon_too_short, "only " + std::to_string(tr.count_samples.empty() ? 0 : tr.count_samples.front().size()) +
                                           " post-warm-up count samples; need " + std::to_string(opt.min_samples));
  return tr;
}

/// Mean and batch-means standard error of a time-ordered series. Consecutive
/// samples are correlated, so the plain standard error understates the noise.
inline std::pair<double, double> batch_mean_estimate(const std::vector<double>& series, std::size_t batches = 20) {
  require(batches >= 2 && series.size() >= batches, "need at least one sample per batch");
  const std::size_t per = series.size() / batches;
  MomentAccumulator all, means;
  for (std::size_t k = 0; k < batches; ++k) {
    MomentAccumulator a;
    for (std::size_t i = k * per; i < (k + 1) * per; ++i) a.add(series[i]);
    means.add(a.mean());
  }
  for (double x : series) all.add(x);
  return {all.mean(), means.standard_error()};
}

struct GoodnessOfFit {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-squared test of integer samples against Poisson(mean). Bins are
/// merged left to right until each expects at least `min_expected` samples;
/// the upper tail is folded into the last bin.
inline GoodnessOfFit poisson_goodness_of_fit(const std::vector<std::size_t>& samples, double mean,
                                             double min_expected = 5.0) {
  require(mean >= 0.0, "Poisson mean must be >= 0");
  const auto n = static_cast<double>(samples.size());
  std::size_t kmax = 0;
  for (auto s : samples) kmax = std::max(kmax, s);

  struct Bin {
    double expected = 0.0;
    double observed = 0.0;
  };
  std::vector<Bin> bins;
  Bin cur;
  double pmf = std::exp(-mean), cdf = 0.0;
  std::vector<double> obs(kmax + 1, 0.0);
  for (auto s : samples) obs[s] += 1.0;
  std::size_t k = 0;
  for (;; ++k) {
    cur.expected += n * pmf;
    cur.observed += k <= kmax ? obs[k] : 0.0;
    cdf += pmf;
    if (cur.expected >= min_expected) {
      bins.push_back(cur);
      cur = {};
    }
    if (n * (1.0 - cdf) < min_expected && k >= kmax) break;
    pmf *= mean / static_cast<double>(k + 1);
    if (k > 100000) break;
  }
  // tail mass and any unfinished bin go to the last bin
  cur.expected += n * std::max(0.0, 1.0 - cdf);
  for (std::size_t j = k + 1; j <= kmax; ++j) cur.observed += obs[j];
  if (bins.empty()) return {};
  bins.back().expected += cur.expected;
  bins.back().observed += cur.observed;
  if (bins.size() < 2) return {};

  GoodnessOfFit g;
  for (const auto& b : bins) g.statistic += (b.observed - b.expected) * (b.observed - b.expected) / b.expected;
  g.dof = bins.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(g.dof));
  g.p_value = boost::math::cdf(boost::math::complement(dist, g.statistic));
  return g;
}

}  // namespace scpf
