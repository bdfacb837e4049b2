#pragma once

// YAML scenario files. Every mapping is checked against its list of known
// keys; mistakes are reported with the line they occur on.

#include "scpf/error.hpp"
#include "scpf/linalg.hpp"
#include "scpf/net_model.hpp"
#include "scpf/radio_env.hpp"
#include "scpf/shaping_game.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace scpf {

struct SweepSpec {
  std::string variable = "load_scale";  // load_scale | slice_load | arrival_scale
  std::size_t slice = 0;                // slice_load only
  std::vector<double> values{1.0};
};

struct SimulateSpec {
  std::string mode = "palm";  // palm | event
  double horizon = 0.0;       // event mode; 0 picks 400 mean system times
  double warmup_fraction = 0.2;
  double tag_probability = 0.0;
};

struct GeometryRow {
  std::string slice;
  double slice_norm = 0.0;
  double aggregate_norm = 0.0;
  double angle_deg = 0.0;
};

struct ExperimentSpec {
  SweepSpec sweep;
  std::size_t reps = 10000;
  double tol = 1e-6;
  unsigned threads = 1;
  std::string out = "results";
  SimulateSpec simulate;
  GnepParams game;
  std::optional<Mat> coupling;  // dimension: use this H instead of deriving it
};

struct RadioSpec {
  RadioScenario scenario;
  std::vector<double> load_sweep{1.0};  // multiplies every slice population
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::size_t stations = 0;
  std::vector<SliceSpec> slices;
  std::vector<std::optional<Vec>> loads;  // per slice, when loads are given directly
  ExperimentSpec experiment;
  std::vector<GeometryRow> geometry;
  std::optional<RadioSpec> radio;
  std::string hash;  // FNV-1a of the file contents, 16 hex digits
};

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::string at_line(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
}

[[noreturn]] inline void config_error(const YAML::Node& n, const std::string& what) {
  fail(ErrorCode::config, at_line(n) + what);
}

inline void check_keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> known) {
  if (!n.IsMap()) config_error(n, where + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) config_error(kv.first, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_error(n, what + " has the wrong type");
  }
}

/// A number, or a fraction written as "a/b".
inline double number(const YAML::Node& n, const std::string& what) {
  if (!n.IsScalar()) config_error(n, what + " must be a number");
  const auto s = n.Scalar();
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      std::size_t used = 0;
      const double x = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return x;
    }
    std::size_t u1 = 0, u2 = 0;
    const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    const double num = std::stod(a, &u1), den = std::stod(b, &u2);
    if (u1 != a.size() || u2 != b.size() || den == 0.0) throw std::invalid_argument(s);
    return num / den;
  } catch (const std::exception&) {
    config_error(n, what + ": cannot read '" + s + "' as a number");
  }
}

/// Scalar broadcast to length b, or a list of exactly b numbers.
inline Vec vector_of(const YAML::Node& n, std::size_t b, const std::string& what) {
  const auto B = static_cast<Eigen::Index>(b);
  if (n.IsScalar()) return Vec::Constant(B, number(n, what));
  if (!n.IsSequence() || n.size() != b)
    config_error(n, what + " must be a number or a list of " + std::to_string(b) + " numbers");
  Vec v(B);
  for (std::size_t i = 0; i < b; ++i) v[static_cast<Eigen::Index>(i)] = number(n[i], what);
  return v;
}

inline Mat matrix_of(const YAML::Node& n, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!n.IsSequence() || n.size() != rows) config_error(n, what + " must have " + std::to_string(rows) + " rows");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!n[i].IsSequence() || n[i].size() != cols)
      config_error(n[i], what + " rows must have " + std::to_string(cols) + " entries");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(n[i][j], what);
  }
  return m;
}

inline Mat routing_of(const YAML::Node& n, std::size_t b, const std::string& what) {
  const auto B = static_cast<Eigen::Index>(b);
  if (!n) return Mat::Zero(B, B);
  if (n.IsMap()) {
    check_keys(n, what, {"grid"});
    const auto g = n["grid"];
    check_keys(g, what + ".grid", {"rows", "cols", "exit", "hot", "bias"});
    if (!g["rows"] || !g["cols"] || !g["exit"]) config_error(g, what + ".grid needs rows, cols and exit");
    const auto rows = get<std::size_t>(g["rows"], "rows"), cols = get<std::size_t>(g["cols"], "cols");
    if (rows * cols != b) config_error(g, what + ".grid must cover exactly " + std::to_string(b) + " stations");
    try {
      return grid_routing(rows, cols, number(g["exit"], "exit"), g["hot"] ? get<std::size_t>(g["hot"], "hot") : 0,
                          g["bias"] ? number(g["bias"], "bias") : 0.0);
    } catch (const Error& e) {
      config_error(g, e.what());
    }
  }
  return matrix_of(n, b, b, what);
}

inline SojournModel sojourn_model_of(const YAML::Node& n, const std::string& what) {
  check_keys(n, what, {"kind", "log_sigma"});
  SojournModel m;
  const auto kind = n["kind"] ? get<std::string>(n["kind"], what + ".kind") : "exponential";
  if (kind == "exponential") m.kind = SojournKind::exponential;
  else if (kind == "deterministic") m.kind = SojournKind::deterministic;
  else if (kind == "lognormal") m.kind = SojournKind::lognormal;
  else config_error(n["kind"], "unknown sojourn kind '" + kind + "'");
  if (n["log_sigma"]) m.log_sigma = number(n["log_sigma"], "log_sigma");
  return m;
}

inline CapacityModel capacity_model_of(const YAML::Node& n, const std::string& what) {
  check_keys(n, what, {"kind", "log_sigma"});
  CapacityModel m;
  const auto kind = n["kind"] ? get<std::string>(n["kind"], what + ".kind") : "deterministic";
  if (kind == "deterministic") m.kind = CapacityKind::deterministic;
  else if (kind == "lognormal") m.kind = CapacityKind::lognormal;
  else config_error(n["kind"], "unknown capacity kind '" + kind + "'");
  if (n["log_sigma"]) m.log_sigma = number(n["log_sigma"], "log_sigma");
  return m;
}

inline std::vector<double> numbers_of(const YAML::Node& n, const std::string& what) {
  if (n.IsScalar()) return {number(n, what)};
  if (!n.IsSequence() || n.size() == 0) config_error(n, what + " must be a non-empty list of numbers");
  std::vector<double> out;
  for (const auto& x : n) out.push_back(number(x, what));
  return out;
}

inline void parse_experiment(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "experiment", {"sweep", "reps", "tol", "threads", "out", "simulate", "game", "coupling"});
  auto& e = cfg.experiment;
  if (const auto s = n["sweep"]) {
    check_keys(s, "experiment.sweep", {"variable", "slice", "values", "from", "to", "points", "log"});
    if (s["variable"]) e.sweep.variable = get<std::string>(s["variable"], "sweep.variable");
    if (e.sweep.variable != "load_scale" && e.sweep.variable != "slice_load" && e.sweep.variable != "arrival_scale")
      config_error(s["variable"], "sweep.variable must be load_scale, slice_load or arrival_scale");
    if (s["slice"]) e.sweep.slice = get<std::size_t>(s["slice"], "sweep.slice");
    if (s["values"]) {
      e.sweep.values = numbers_of(s["values"], "sweep.values");
    } else if (s["from"] && s["to"] && s["points"]) {
      const double a = number(s["from"], "sweep.from"), b = number(s["to"], "sweep.to");
      const auto k = get<std::size_t>(s["points"], "sweep.points");
      const bool log = s["log"] && get<bool>(s["log"], "sweep.log");
      if (k < 1 || (log && !(a > 0.0 && b > 0.0))) config_error(s, "sweep needs points >= 1 (and positive ends if log)");
      e.sweep.values.clear();
      for (std::size_t i = 0; i < k; ++i) {
        const double t = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
        e.sweep.values.push_back(log ? a * std::pow(b / a, t) : a + (b - a) * t);
      }
    } else if (s["from"] || s["to"] || s["points"]) {
      config_error(s, "sweep needs all of from, to and points");
    }
  }
  if (n["reps"]) e.reps = get<std::size_t>(n["reps"], "reps");
  if (n["tol"]) e.tol = number(n["tol"], "tol");
  if (n["threads"]) e.threads = get<unsigned>(n["threads"], "threads");
  if (n["out"]) e.out = get<std::string>(n["out"], "out");
  if (const auto s = n["simulate"]) {
    check_keys(s, "experiment.simulate", {"mode", "horizon", "warmup_fraction", "tag_probability"});
    if (s["mode"]) e.simulate.mode = get<std::string>(s["mode"], "simulate.mode");
    if (e.simulate.mode != "palm" && e.simulate.mode != "event")
      config_error(s["mode"], "simulate.mode must be palm or event");
    if (s["horizon"]) e.simulate.horizon = number(s["horizon"], "simulate.horizon");
    if (s["warmup_fraction"]) e.simulate.warmup_fraction = number(s["warmup_fraction"], "warmup_fraction");
    if (s["tag_probability"]) e.simulate.tag_probability = number(s["tag_probability"], "tag_probability");
  }
  if (const auto g = n["game"]) {
    check_keys(g, "experiment.game", {"epsilon", "beta", "sigma", "eta", "max_iter", "lambda0"});
    auto& p = e.game;
    if (g["epsilon"]) p.epsilon = number(g["epsilon"], "epsilon");
    if (g["beta"]) p.beta = number(g["beta"], "beta");
    if (g["sigma"]) p.sigma = number(g["sigma"], "sigma");
    if (g["eta"]) p.eta = number(g["eta"], "eta");
    if (g["max_iter"]) p.max_iter = get<std::size_t>(g["max_iter"], "max_iter");
    if (g["lambda0"]) p.lambda0 = number(g["lambda0"], "lambda0");
  }
  if (const auto h = n["coupling"]) {
    if (!h.IsSequence() || h.size() == 0) config_error(h, "coupling must be a square matrix");
    e.coupling = matrix_of(h, h.size(), h.size(), "coupling");
  }
}

inline MobilityModel mobility_of(const YAML::Node& n, const std::string& what) {
  MobilityModel m;
  if (!n) return m;
  check_keys(n, what, {"kind", "speed_min", "speed_max", "pause_max", "hotspots", "uniform_fraction"});
  const auto kind = n["kind"] ? get<std::string>(n["kind"], what + ".kind") : "random_waypoint";
  if (kind == "random_waypoint") m.kind = MobilityModel::Kind::random_waypoint;
  else if (kind == "hotspot_waypoint") m.kind = MobilityModel::Kind::hotspot_waypoint;
  else config_error(n["kind"], "unknown mobility kind '" + kind + "'");
  if (n["speed_min"]) m.speed_min = number(n["speed_min"], "speed_min");
  if (n["speed_max"]) m.speed_max = number(n["speed_max"], "speed_max");
  if (n["pause_max"]) m.pause_max = number(n["pause_max"], "pause_max");
  if (n["uniform_fraction"]) m.uniform_fraction = number(n["uniform_fraction"], "uniform_fraction");
  if (const auto hs = n["hotspots"]) {
    if (!hs.IsSequence()) config_error(hs, "hotspots must be a list");
    for (const auto& h : hs) {
      check_keys(h, what + ".hotspots[]", {"x", "y", "sigma", "weight"});
      Hotspot spot;
      if (!h["x"] || !h["y"]) config_error(h, "hotspot needs x and y");
      spot.center = {number(h["x"], "x"), number(h["y"], "y")};
      if (h["sigma"]) spot.sigma = number(h["sigma"], "sigma");
      if (h["weight"]) spot.weight = number(h["weight"], "weight");
      m.hotspots.push_back(spot);
    }
  }
  if (m.kind == MobilityModel::Kind::hotspot_waypoint && m.hotspots.empty())
    config_error(n, what + ": hotspot_waypoint needs at least one hotspot");
  return m;
}

inline RadioSpec parse_radio(const YAML::Node& n) {
  check_keys(n, "radio", {"layout", "channel", "rates", "slices", "horizon_s", "warmup_s", "exit_probability",
                          "min_sector_samples", "record_trace", "load_sweep"});
  RadioSpec spec;
  auto& sc = spec.scenario;
  if (const auto l = n["layout"]) {
    check_keys(l, "radio.layout", {"rings", "inter_site_distance", "sectors_per_site"});
    if (l["rings"]) sc.layout.rings = get<std::size_t>(l["rings"], "rings");
    if (l["inter_site_distance"]) sc.layout.inter_site_distance = number(l["inter_site_distance"], "inter_site_distance");
    if (l["sectors_per_site"]) sc.layout.sectors_per_site = get<std::size_t>(l["sectors_per_site"], "sectors_per_site");
  }
  if (const auto c = n["channel"]) {
    check_keys(c, "radio.channel", {"noise_db", "tx_power_db", "carrier_ghz", "antenna_gain_dbi",
                                    "half_power_beamwidth_deg", "front_to_back_db", "shadowing_std_db",
                                    "shadowing_period_s", "fading_samples", "min_distance_m"});
    auto& ch = sc.channel;
    if (c["noise_db"]) ch.noise_db = number(c["noise_db"], "noise_db");
    if (c["tx_power_db"]) ch.tx_power_db = number(c["tx_power_db"], "tx_power_db");
    if (c["carrier_ghz"]) ch.carrier_ghz = number(c["carrier_ghz"], "carrier_ghz");
    if (c["antenna_gain_dbi"]) ch.antenna_gain_dbi = number(c["antenna_gain_dbi"], "antenna_gain_dbi");
    if (c["half_power_beamwidth_deg"]) ch.half_power_beamwidth_deg = number(c["half_power_beamwidth_deg"], "beamwidth");
    if (c["front_to_back_db"]) ch.front_to_back_db = number(c["front_to_back_db"], "front_to_back_db");
    if (c["shadowing_std_db"]) ch.shadowing_std_db = number(c["shadowing_std_db"], "shadowing_std_db");
    if (c["shadowing_period_s"]) ch.shadowing_period_s = number(c["shadowing_period_s"], "shadowing_period_s");
    if (c["fading_samples"]) ch.fading_samples = get<std::size_t>(c["fading_samples"], "fading_samples");
    if (c["min_distance_m"]) ch.min_distance_m = number(c["min_distance_m"], "min_distance_m");
  }
  if (const auto r = n["rates"]) {
    check_keys(r, "radio.rates", {"kind", "bandwidth", "min_sinr_db", "max_sinr_db", "table"});
    const auto kind = r["kind"] ? get<std::string>(r["kind"], "rates.kind") : "shannon";
    if (kind == "shannon") sc.rates.kind = RateMap::Kind::shannon;
    else if (kind == "table") sc.rates.kind = RateMap::Kind::table;
    else config_error(r["kind"], "rates.kind must be shannon or table");
    if (r["bandwidth"]) sc.rates.bandwidth = number(r["bandwidth"], "bandwidth");
    if (r["min_sinr_db"]) sc.rates.min_sinr_db = number(r["min_sinr_db"], "min_sinr_db");
    if (r["max_sinr_db"]) sc.rates.max_sinr_db = number(r["max_sinr_db"], "max_sinr_db");
    if (const auto t = r["table"]) {
      if (!t.IsSequence()) config_error(t, "rates.table must be a list of [sinr_db, rate] pairs");
      for (const auto& row : t) {
        if (!row.IsSequence() || row.size() != 2) config_error(row, "rates.table entries must be [sinr_db, rate]");
        sc.rates.table.emplace_back(number(row[0], "sinr_db"), number(row[1], "rate"));
      }
    }
    try {
      sc.rates.validate();
    } catch (const Error& e) {
      config_error(r, e.what());
    }
  }
  const auto sectors = sc.layout.sectors().size();
  if (!n["slices"] || !n["slices"].IsSequence() || n["slices"].size() == 0)
    config_error(n, "radio needs a non-empty slices list");
  for (const auto& s : n["slices"]) {
    check_keys(s, "radio.slices[]", {"name", "share", "population", "users_per_sector", "mobility"});
    RadioSlice rs;
    rs.name = s["name"] ? get<std::string>(s["name"], "name") : "slice" + std::to_string(sc.slices.size());
    if (!s["share"]) config_error(s, "radio slice needs a share");
    rs.share = number(s["share"], "share");
    if (s["population"] && s["users_per_sector"]) config_error(s, "give population or users_per_sector, not both");
    if (s["population"]) rs.population = get<std::size_t>(s["population"], "population");
    if (s["users_per_sector"])
      rs.population = static_cast<std::size_t>(
          std::lround(number(s["users_per_sector"], "users_per_sector") * static_cast<double>(sectors)));
    rs.mobility = mobility_of(s["mobility"], "radio.slices[].mobility");
    sc.slices.push_back(rs);
  }
  if (n["horizon_s"]) sc.horizon_s = number(n["horizon_s"], "horizon_s");
  if (n["warmup_s"]) sc.warmup_s = number(n["warmup_s"], "warmup_s");
  if (n["exit_probability"]) sc.exit_probability = number(n["exit_probability"], "exit_probability");
  if (n["min_sector_samples"]) sc.min_sector_samples = get<std::size_t>(n["min_sector_samples"], "min_sector_samples");
  if (n["record_trace"]) sc.record_trace = get<bool>(n["record_trace"], "record_trace");
  if (n["load_sweep"]) spec.load_sweep = numbers_of(n["load_sweep"], "load_sweep");
  return spec;
}

}  // namespace detail

/// Parses a scenario from YAML text. `hash` is computed over the text itself.
inline ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::config, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || !root.IsMap()) fail(ErrorCode::config, "the scenario file must be a YAML mapping");
  detail::check_keys(root, "scenario", {"name", "seed", "stations", "slices", "experiment", "geometry", "radio"});

  ScenarioConfig cfg;
  cfg.hash = fnv1a_hex(text);
  if (root["name"]) cfg.name = detail::get<std::string>(root["name"], "name");
  if (root["seed"]) {
    cfg.seed = detail::get<std::uint64_t>(root["seed"], "seed");
    cfg.seed_given = true;
  }

  if (const auto sl = root["slices"]) {
    if (!root["stations"]) detail::config_error(root, "slices need a station count");
    cfg.stations = detail::get<std::size_t>(root["stations"], "stations");
    if (cfg.stations < 1) detail::config_error(root["stations"], "stations must be >= 1");
    if (!sl.IsSequence() || sl.size() == 0) detail::config_error(sl, "slices must be a non-empty list");
    const std::size_t B = cfg.stations;
    for (const auto& s : sl) {
      detail::check_keys(s, "slices[]", {"name", "share", "arrivals", "sojourn", "routing", "delta", "loads", "target",
                                         "normalized_target", "capacity", "sojourn_model", "population"});
      SliceSpec spec;
      const std::string who = "slice " + std::to_string(cfg.slices.size());
      spec.name = s["name"] ? detail::get<std::string>(s["name"], "name") : "slice" + std::to_string(cfg.slices.size());
      if (!s["share"]) detail::config_error(s, who + " needs a share");
      spec.share = detail::number(s["share"], "share");
      spec.delta = s["delta"] ? detail::vector_of(s["delta"], B, "delta") : Vec::Ones(static_cast<Eigen::Index>(B));
      spec.sojourn = s["sojourn"] ? detail::vector_of(s["sojourn"], B, "sojourn") : Vec::Ones(static_cast<Eigen::Index>(B));
      spec.routing = detail::routing_of(s["routing"], B, "routing");
      std::optional<Vec> loads;
      if (s["loads"]) {
        if (s["arrivals"]) detail::config_error(s, who + ": give loads or arrivals, not both");
        loads = detail::vector_of(s["loads"], B, "loads");
        // loads stand for an open network without handoffs: gamma = rho / mu
        spec.arrivals = loads->cwiseQuotient(spec.sojourn);
        if (s["routing"]) detail::config_error(s["routing"], who + ": routing cannot be combined with loads");
      } else if (s["arrivals"]) {
        spec.arrivals = detail::vector_of(s["arrivals"], B, "arrivals");
      } else {
        detail::config_error(s, who + " needs loads or arrivals");
      }
      if (s["target"]) spec.target = detail::number(s["target"], "target");
      if (s["normalized_target"]) spec.normalized_target = detail::number(s["normalized_target"], "normalized_target");
      if (s["capacity"]) spec.capacity = detail::capacity_model_of(s["capacity"], who + ".capacity");
      if (s["sojourn_model"]) spec.sojourn_model = detail::sojourn_model_of(s["sojourn_model"], who + ".sojourn_model");
      if (s["population"]) spec.population = detail::get<std::size_t>(s["population"], "population");
      cfg.slices.push_back(std::move(spec));
      cfg.loads.push_back(std::move(loads));
    }
    try {
      (void)TrafficModel(BaseStationSet{B}, cfg.slices);
    } catch (const Error& e) {
      detail::config_error(sl, e.what());
    }
  } else if (root["stations"]) {
    detail::config_error(root["stations"], "stations given without slices");
  }

  if (const auto e = root["experiment"]) detail::parse_experiment(e, cfg);
  if (const auto g = root["geometry"]) {
    if (!g.IsSequence()) detail::config_error(g, "geometry must be a list");
    for (const auto& row : g) {
      detail::check_keys(row, "geometry[]", {"slice", "slice_norm", "aggregate_norm", "angle_deg"});
      if (!row["slice_norm"] || !row["aggregate_norm"] || !row["angle_deg"])
        detail::config_error(row, "geometry rows need slice_norm, aggregate_norm and angle_deg");
      cfg.geometry.push_back({row["slice"] ? detail::get<std::string>(row["slice"], "slice") : "",
                              detail::number(row["slice_norm"], "slice_norm"),
                              detail::number(row["aggregate_norm"], "aggregate_norm"),
                              detail::number(row["angle_deg"], "angle_deg")});
    }
  }
  if (const auto r = root["radio"]) {
    cfg.radio = detail::parse_radio(r);
    cfg.radio->scenario.seed = cfg.seed;
  }
  if (cfg.slices.empty() && !cfg.radio && cfg.geometry.empty())
    fail(ErrorCode::config, "the scenario defines no slices, geometry or radio block");
  if (cfg.experiment.sweep.variable == "slice_load" && cfg.experiment.sweep.slice >= cfg.slices.size())
    fail(ErrorCode::config, "sweep.slice is out of range");
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::config, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline TrafficModel traffic_model(const ScenarioConfig& cfg) {
  if (cfg.slices.empty()) fail(ErrorCode::config, "the scenario has no slices");
  return TrafficModel(BaseStationSet{cfg.stations}, cfg.slices);
}

/// Loads taken verbatim where given, otherwise from flow conservation.
inline LoadProfile load_profile(const ScenarioConfig& cfg) {
  const auto model = traffic_model(cfg);
  std::vector<Vec> loads, deltas;
  std::vector<CapacityModel> caps;
  for (std::size_t v = 0; v < cfg.slices.size(); ++v) {
    const auto& s = cfg.slices[v];
    loads.push_back(cfg.loads[v] ? *cfg.loads[v] : solve_flow_conservation(s.arrivals, s.routing, s.sojourn));
    deltas.push_back(s.delta);
    caps.push_back(s.capacity);
  }
  return LoadProfile::from_loads(model.shares(), std::move(loads), std::move(deltas), std::move(caps));
}

namespace detail {

inline void emit_vec(YAML::Emitter& e, const Vec& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) e << v[i];
  e << YAML::EndSeq;
}

}  // namespace detail

/// Scenario file for a calibrated radio network. Loading it back yields the
/// same traffic model.
inline std::string calibrated_config_yaml(const RadioCalibration& cal, const std::string& name, std::uint64_t seed) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << name;
  e << YAML::Key << "seed" << YAML::Value << seed;
  e << YAML::Key << "stations" << YAML::Value << cal.sectors;
  e << YAML::Key << "slices" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cal.slices) {
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << s.name;
    e << YAML::Key << "share" << YAML::Value << s.share;
    e << YAML::Key << "population" << YAML::Value << s.population;
    e << YAML::Key << "arrivals" << YAML::Value;
    detail::emit_vec(e, s.arrivals);
    e << YAML::Key << "sojourn" << YAML::Value;
    detail::emit_vec(e, s.sojourn);
    e << YAML::Key << "delta" << YAML::Value;
    detail::emit_vec(e, s.delta);
    e << YAML::Key << "routing" << YAML::Value << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < s.routing.rows(); ++i) detail::emit_vec(e, s.routing.row(i).transpose());
    e << YAML::EndSeq;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace scpf
