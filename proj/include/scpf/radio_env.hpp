#pragma once

// Multi-sector hexagonal radio network with path loss, sector antennas,
// lognormal shadowing and Rayleigh fading, driven by waypoint mobility. The
// run measures per-user rates and calibrates the abstract traffic model
// (delta, relative loads, routing, sojourns, arrivals) from the traces.

#include "scpf/allocation.hpp"
#include "scpf/analytic_btd.hpp"
#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/net_model.hpp"
#include "scpf/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace scpf {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Sector {
  std::size_t site;
  Point position;
  double boresight_deg;
};

struct HexLayout {
  std::size_t rings = 2;  // 1 + 3 r (r + 1) sites
  double inter_site_distance = 200.0;
  std::size_t sectors_per_site = 3;

  std::vector<Point> sites() const {
    std::vector<Point> out;
    const int r = static_cast<int>(rings);
    for (int q = -r; q <= r; ++q)
      for (int s = -r; s <= r; ++s) {
        if (std::abs(q + s) > r) continue;
        out.push_back({inter_site_distance * (q + 0.5 * s), inter_site_distance * (std::sqrt(3.0) / 2.0 * s)});
      }
    // center site first, then by distance and angle for stable numbering
    std::stable_sort(out.begin(), out.end(), [](const Point& a, const Point& b) {
      const double da = std::hypot(a.x, a.y), db = std::hypot(b.x, b.y);
      if (std::abs(da - db) > 1e-9) return da < db;
      return std::atan2(a.y, a.x) < std::atan2(b.y, b.x);
    });
    return out;
  }

  std::vector<Sector> sectors() const {
    require(sectors_per_site >= 1, "at least one sector per site");
    std::vector<Sector> out;
    const auto s = sites();
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t k = 0; k < sectors_per_site; ++k)
        out.push_back({i, s[i], 30.0 + 360.0 * static_cast<double>(k) / static_cast<double>(sectors_per_site)});
    return out;
  }

  /// Axis-aligned box around the sites, padded by half an inter-site distance.
  std::pair<Point, Point> bounds() const {
    const auto s = sites();
    Point lo{1e300, 1e300}, hi{-1e300, -1e300};
    for (const auto& p : s) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    const double pad = inter_site_distance / 2.0;
    return {{lo.x - pad, lo.y - pad}, {hi.x + pad, hi.y + pad}};
  }
};

struct ChannelParams {
  double noise_db = -104.0;
  double tx_power_db = 41.0;
  double carrier_ghz = 2.5;
  double antenna_gain_dbi = 17.0;
  double half_power_beamwidth_deg = 70.0;
  double front_to_back_db = 20.0;
  double shadowing_std_db = 8.0;
  double shadowing_period_s = 1.0;
  std::size_t fading_samples = 10;  // Rayleigh draws averaged per second
  double min_distance_m = 10.0;
};

/// 36.7 log10(d) + 22.7 + 26 log10(fc), d in meters, fc in GHz.
inline double path_loss_db(double distance_m, double carrier_ghz) {
  if (!(distance_m > 0.0)) fail(ErrorCode::nonpositive_distance, "distance must be positive");
  require(carrier_ghz > 0.0, "carrier frequency must be positive");
  return 36.7 * std::log10(distance_m) + 22.7 + 26.0 * std::log10(carrier_ghz);
}

/// Parabolic horizontal pattern, clipped at the front-to-back ratio.
inline double antenna_gain_db(const ChannelParams& ch, double offset_deg, std::size_t sectors_per_site) {
  if (sectors_per_site <= 1) return ch.antenna_gain_dbi;
  double a = std::fmod(offset_deg + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  a -= 180.0;
  const double r = a / ch.half_power_beamwidth_deg;
  return ch.antenna_gain_dbi - std::min(12.0 * r * r, ch.front_to_back_db);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

/// SINR of `serving` given linear received powers from every sector.
inline double sinr(const std::vector<double>& received, std::size_t serving, double noise_linear) {
  require(serving < received.size(), "serving sector out of range");
  double interference = 0.0;
  for (std::size_t k = 0; k < received.size(); ++k)
    if (k != serving) interference += received[k];
  return received[serving] / (interference + noise_linear);
}

/// Mean received power (dB) from every sector at `pos`: transmit power, path
/// loss, antenna pattern and the per-site shadowing terms.
inline std::vector<double> large_scale_rx_db(const HexLayout& layout, const std::vector<Sector>& sectors,
                                             const ChannelParams& ch, Point pos, const std::vector<double>& shadow_db) {
  std::vector<double> out(sectors.size());
  for (std::size_t b = 0; b < sectors.size(); ++b) {
    const auto& s = sectors[b];
    const double dx = pos.x - s.position.x, dy = pos.y - s.position.y;
    const double d = std::max(std::hypot(dx, dy), ch.min_distance_m);
    const double bearing = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    out[b] = ch.tx_power_db - path_loss_db(d, ch.carrier_ghz) +
             antenna_gain_db(ch, bearing - s.boresight_deg, layout.sectors_per_site) +
             (shadow_db.empty() ? 0.0 : shadow_db[s.site]);
  }
  return out;
}

struct RateMap {
  enum class Kind { shannon, table } kind = Kind::shannon;
  // truncated Shannon: bandwidth * log2(1 + SINR) with SINR clamped to [min, max] dB
  double bandwidth = 1.0;
  double min_sinr_db = -10.0;
  double max_sinr_db = 20.0;
  // table: ascending SINR thresholds (dB) and rates; below the first threshold
  // the first rate applies
  std::vector<std::pair<double, double>> table;

  double rate(double sinr_linear) const {
    const double s = linear_to_db(std::max(sinr_linear, 1e-300));
    if (kind == Kind::shannon) {
      const double c = std::clamp(s, min_sinr_db, max_sinr_db);
      return bandwidth * std::log2(1.0 + db_to_linear(c));
    }
    require(!table.empty(), "rate table is empty");
    double r = table.front().second;
    for (const auto& [thr, rate] : table)
      if (s >= thr) r = rate;
    return r;
  }

  void validate() const {
    if (kind == Kind::shannon) {
      require(bandwidth > 0.0 && min_sinr_db < max_sinr_db, "Shannon map needs bandwidth > 0 and min < max");
      return;
    }
    require(!table.empty(), "rate table is empty");
    for (std::size_t i = 0; i < table.size(); ++i) {
      require(table[i].second > 0.0, "table rates must be positive");
      if (i > 0)
        require(table[i].first > table[i - 1].first && table[i].second >= table[i - 1].second,
                "rate table must be increasing in SINR and nondecreasing in rate");
    }
  }
};

struct Hotspot {
  Point center;
  double sigma = 100.0;
  double weight = 1.0;
};

struct MobilityModel {
  enum class Kind { random_waypoint, hotspot_waypoint } kind = Kind::random_waypoint;
  double speed_min = 5.0;  // m/s
  double speed_max = 15.0;
  double pause_max = 5.0;  // s
  std::vector<Hotspot> hotspots;
  double uniform_fraction = 0.1;  // hotspot variant: share of uniform waypoints
};

struct RadioSlice {
  std::string name;
  double share = 1.0;
  std::size_t population = 10;
  MobilityModel mobility;
};

struct RadioScenario {
  HexLayout layout;
  ChannelParams channel;
  RateMap rates;
  std::vector<RadioSlice> slices;
  double horizon_s = 2000.0;
  double warmup_s = 300.0;
  double exit_probability = 0.1;
  std::size_t min_sector_samples = 1;
  bool record_trace = false;
  std::uint64_t seed = 1;
};

struct TracePoint {
  double time;
  std::size_t user;
  std::size_t slice;
  Point position;
  std::size_t sector;
  double rate;
};

struct CalibratedSlice {
  std::string name;
  double share = 1.0;
  std::size_t population = 0;
  Vec delta;     // mean 1/c over user-time per sector
  Vec relative;  // fraction of user-time per sector
  Mat routing;   // (1 - exit) x empirical handoff frequencies
  Vec sojourn;   // mean dwell per visit (s)
  Vec arrivals;  // open-network arrivals reproducing population * relative
  std::array<double, 3> measured_btd{};  // time-averaged 1/r per scheme
};

struct RadioCalibration {
  std::size_t sectors = 0;
  std::vector<CalibratedSlice> slices;
  std::vector<TracePoint> trace;
  std::vector<std::string> warnings;
  double mean_sinr_db = 0.0;

  /// Open-network model with the calibrated parameters.
  TrafficModel traffic_model() const {
    std::vector<SliceSpec> specs;
    for (const auto& s : slices) {
      SliceSpec sp;
      sp.name = s.name;
      sp.share = s.share;
      sp.arrivals = s.arrivals;
      sp.sojourn = s.sojourn;
      sp.routing = s.routing;
      sp.delta = s.delta;
      sp.population = s.population;
      specs.push_back(std::move(sp));
    }
    return TrafficModel(BaseStationSet{sectors}, std::move(specs));
  }

  /// Mean-BTD formula for a tagged slice-v user in the calibrated network.
  /// Populations are fixed, so a typical user sees N^v - 1 others of its own
  /// slice; the other slices keep their full populations.
  double predicted_btd(std::size_t v, Scheme scheme = Scheme::scpf) const {
    std::vector<double> shares;
    std::vector<Vec> loads, deltas;
    for (std::size_t u = 0; u < slices.size(); ++u) {
      const auto& s = slices[u];
      shares.push_back(s.share);
      const double n = static_cast<double>(s.population) - (u == v ? 1.0 : 0.0);
      loads.push_back(s.relative * n);
      deltas.push_back(s.delta);
    }
    const auto prof = LoadProfile::from_loads(shares, std::move(loads), std::move(deltas));
    return mean_btd(prof, v, scheme);
  }
};

inline void write_trace_csv(const RadioCalibration& cal, std::ostream& os) {
  os << "time,user,slice,x,y,sector,rate\n";
  for (const auto& t : cal.trace)
    os << t.time << ',' << t.user << ',' << t.slice << ',' << t.position.x << ',' << t.position.y << ',' << t.sector
       << ',' << t.rate << '\n';
}

namespace detail {

struct Walker {
  std::size_t slice;
  Point pos;
  Point waypoint;
  double speed;
  double pause;
};

inline Point draw_waypoint(const MobilityModel& m, std::pair<Point, Point> box, Rng& rng) {
  std::uniform_real_distribution<double> ux(box.first.x, box.second.x), uy(box.first.y, box.second.y);
  if (m.kind == MobilityModel::Kind::random_waypoint || m.hotspots.empty()) return {ux(rng), uy(rng)};
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < m.uniform_fraction) return {ux(rng), uy(rng)};
  double total = 0.0;
  for (const auto& h : m.hotspots) total += h.weight;
  double x = u01(rng) * total;
  const Hotspot* pick = &m.hotspots.back();
  for (const auto& h : m.hotspots) {
    x -= h.weight;
    if (x < 0.0) {
      pick = &h;
      break;
    }
  }
  std::normal_distribution<double> nx(pick->center.x, pick->sigma), ny(pick->center.y, pick->sigma);
  return {std::clamp(nx(rng), box.first.x, box.second.x), std::clamp(ny(rng), box.first.y, box.second.y)};
}

inline void step_walker(Walker& w, const MobilityModel& m, std::pair<Point, Point> box, double dt, Rng& rng) {
  double left = dt;
  while (left > 0.0) {
    if (w.pause > 0.0) {
      const double p = std::min(w.pause, left);
      w.pause -= p;
      left -= p;
      continue;
    }
    const double dx = w.waypoint.x - w.pos.x, dy = w.waypoint.y - w.pos.y;
    const double dist = std::hypot(dx, dy);
    const double reach = w.speed * left;
    if (reach < dist) {
      w.pos.x += dx / dist * reach;
      w.pos.y += dy / dist * reach;
      return;
    }
    w.pos = w.waypoint;
    left -= dist / w.speed;
    w.pause = std::uniform_real_distribution<double>(0.0, m.pause_max)(rng);
    w.waypoint = draw_waypoint(m, box, rng);
    w.speed = std::uniform_real_distribution<double>(m.speed_min, m.speed_max)(rng);
  }
}

}  // namespace detail

/// Runs the radio simulation in 1 s steps and calibrates the abstract model.
/// Shadowing is redrawn every `shadowing_period_s`; each step's rate uses the
/// SINR averaged over `fading_samples` Rayleigh draws.
inline RadioCalibration simulate_and_calibrate(const RadioScenario& sc) {
  require(!sc.slices.empty(), "at least one slice is required");
  require(sc.horizon_s > sc.warmup_s && sc.warmup_s >= 0.0, "horizon must exceed the warm-up");
  require(sc.exit_probability > 0.0 && sc.exit_probability < 1.0, "exit probability must lie in (0, 1)");
  require(sc.channel.fading_samples >= 1, "at least one fading sample per step");
  sc.rates.validate();
  for (const auto& s : sc.slices) {
    require(s.population >= 1, "slice populations must be positive");
    require(s.mobility.speed_min > 0.0 && s.mobility.speed_max >= s.mobility.speed_min, "speeds must be positive");
  }
  double share_sum = 0.0;
  for (const auto& s : sc.slices) share_sum += s.share;
  require(std::abs(share_sum - 1.0) <= share_sum_tolerance, "shares must sum to 1");

  const auto sectors = sc.layout.sectors();
  const std::size_t B = sectors.size(), V = sc.slices.size();
  const std::size_t n_sites = sc.layout.sites().size();
  const auto box = sc.layout.bounds();
  Rng rng = make_stream(sc.seed, 0);
  Rng fade_rng = make_stream(sc.seed, 1);

  std::vector<detail::Walker> users;
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t k = 0; k < sc.slices[v].population; ++k) {
      const auto& m = sc.slices[v].mobility;
      detail::Walker w{v, detail::draw_waypoint(m, box, rng), {}, 0.0, 0.0};
      w.waypoint = detail::draw_waypoint(m, box, rng);
      w.speed = std::uniform_real_distribution<double>(m.speed_min, m.speed_max)(rng);
      users.push_back(w);
    }
  const std::size_t U = users.size();

  std::vector<std::vector<double>> shadow(U, std::vector<double>(n_sites, 0.0));
  std::normal_distribution<double> shadow_draw(0.0, sc.channel.shadowing_std_db);
  std::exponential_distribution<double> rayleigh_power(1.0);
  const double noise = db_to_linear(sc.channel.noise_db);

  // accumulators
  std::vector<double> occupancy(V * B, 0.0), inv_rate(V * B, 0.0);
  std::vector<double> sector_samples(B, 0.0), sector_inv_rate(B, 0.0);
  std::vector<double> departures(V * B, 0.0);
  std::vector<Mat> handoffs(V, Mat::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(B)));
  std::vector<std::array<double, 3>> btd_sum(V, {0.0, 0.0, 0.0});
  std::vector<double> btd_count(V, 0.0);
  std::vector<std::size_t> previous(U, B);
  std::vector<std::size_t> serving(U);
  std::vector<double> rate(U);
  double sinr_db_sum = 0.0, sinr_db_n = 0.0;

  RadioCalibration cal;
  cal.sectors = B;
  const double dt = 1.0;
  double next_shadow = 0.0;
  std::vector<double> rx(B);
  const auto shares = [&] {
    std::vector<double> s;
    for (const auto& sl : sc.slices) s.push_back(sl.share);
    return s;
  }();

  for (double t = 0.0; t < sc.horizon_s; t += dt) {
    if (t >= next_shadow) {
      for (auto& row : shadow)
        for (auto& s : row) s = shadow_draw(rng);
      next_shadow += sc.channel.shadowing_period_s;
    }
    for (std::size_t i = 0; i < U; ++i) {
      const auto rx_db = large_scale_rx_db(sc.layout, sectors, sc.channel, users[i].pos, shadow[i]);
      std::size_t best = 0;
      for (std::size_t b = 0; b < B; ++b) {
        rx[b] = db_to_linear(rx_db[b]);
        if (rx_db[b] > rx_db[best]) best = b;
      }
      double avg = 0.0;
      std::vector<double> faded(B);
      for (std::size_t f = 0; f < sc.channel.fading_samples; ++f) {
        for (std::size_t b = 0; b < B; ++b) faded[b] = rx[b] * rayleigh_power(fade_rng);
        avg += sinr(faded, best, noise);
      }
      avg /= static_cast<double>(sc.channel.fading_samples);
      serving[i] = best;
      rate[i] = sc.rates.rate(avg);
      if (t >= sc.warmup_s) {
        sinr_db_sum += linear_to_db(avg);
        sinr_db_n += 1.0;
      }
    }

    if (t >= sc.warmup_s) {
      Snapshot snap(V, B);
      std::vector<std::size_t> idx(U);
      for (std::size_t i = 0; i < U; ++i) {
        idx[i] = snap.count(users[i].slice, serving[i]);
        snap.add_user(users[i].slice, serving[i], rate[i]);
      }
      std::array<RateAllocation, 3> alloc{allocate(snap, shares, Scheme::scpf), allocate(snap, shares, Scheme::ss),
                                          allocate(snap, shares, Scheme::gps)};
      for (std::size_t i = 0; i < U; ++i) {
        const std::size_t v = users[i].slice, b = serving[i];
        occupancy[v * B + b] += 1.0;
        inv_rate[v * B + b] += 1.0 / rate[i];
        sector_samples[b] += 1.0;
        sector_inv_rate[b] += 1.0 / rate[i];
        for (int s = 0; s < 3; ++s) btd_sum[v][static_cast<std::size_t>(s)] += 1.0 / alloc[static_cast<std::size_t>(s)].cell(v, b)[idx[i]].rate;
        btd_count[v] += 1.0;
        if (previous[i] < B && previous[i] != b) {
          handoffs[v](static_cast<Eigen::Index>(previous[i]), static_cast<Eigen::Index>(b)) += 1.0;
          departures[v * B + previous[i]] += 1.0;
        }
        if (sc.record_trace) cal.trace.push_back({t, i, v, users[i].pos, b, rate[i]});
      }
    }
    for (std::size_t i = 0; i < U; ++i) {
      previous[i] = t >= sc.warmup_s ? serving[i] : B;
      detail::step_walker(users[i], sc.slices[users[i].slice].mobility, box, dt, rng);
    }
  }
  cal.mean_sinr_db = sinr_db_n > 0.0 ? sinr_db_sum / sinr_db_n : 0.0;

  std::vector<std::size_t> starved;
  for (std::size_t b = 0; b < B; ++b)
    if (sector_samples[b] < static_cast<double>(std::max<std::size_t>(sc.min_sector_samples, 1))) starved.push_back(b);
  if (!starved.empty()) {
    std::string list;
    for (auto b : starved) list += (list.empty() ? "" : ",") + std::to_string(b);
    fail(ErrorCode::insufficient_samples, "sectors without enough samples: " + list);
  }

  const double keep = 1.0 - sc.exit_probability;
  for (std::size_t v = 0; v < V; ++v) {
    CalibratedSlice cs;
    cs.name = sc.slices[v].name;
    cs.share = sc.slices[v].share;
    cs.population = sc.slices[v].population;
    const auto Bi = static_cast<Eigen::Index>(B);
    cs.delta = Vec(Bi);
    cs.relative = Vec(Bi);
    cs.sojourn = Vec(Bi);
    cs.routing = Mat::Zero(Bi, Bi);
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) total += occupancy[v * B + b];
    std::size_t unvisited = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const auto i = static_cast<Eigen::Index>(b);
      const double occ = occupancy[v * B + b];
      cs.relative[i] = occ / total;
      // a sector the slice never used inherits the all-slice average
      cs.delta[i] = occ > 0.0 ? inv_rate[v * B + b] / occ : sector_inv_rate[b] / sector_samples[b];
      if (occ == 0.0) ++unvisited;
      const double dep = departures[v * B + b];
      cs.sojourn[i] = dep > 0.0 ? occ * dt / dep : std::max(occ * dt, dt);
      if (dep > 0.0) cs.routing.row(i) = keep * handoffs[v].row(i) / dep;
    }
    if (unvisited > 0)
      cal.warnings.push_back("slice " + cs.name + ": " + std::to_string(unvisited) +
                             " sectors never visited; delta taken from the all-slice average");
    const Vec load = cs.relative * static_cast<double>(cs.population);
    cs.arrivals = ((Mat::Identity(Bi, Bi) - cs.routing.transpose()) * load.cwiseQuotient(cs.sojourn)).cwiseMax(0.0);
    for (int s = 0; s < 3; ++s) cs.measured_btd[static_cast<std::size_t>(s)] = btd_sum[v][static_cast<std::size_t>(s)] / btd_count[v];
    cal.slices.push_back(std::move(cs));
  }
  return cal;
}

}  // namespace scpf
