#pragma once

// Experiment pipelines behind the command line: load sweeps of the analytic
// gains, Monte Carlo and event-driven checks, share dimensioning, game runs
// and radio calibration. Tabular output is long-format CSV; structured
// solutions are JSON.

#include "scpf/analytic_btd.hpp"
#include "scpf/config.hpp"
#include "scpf/dimensioning.hpp"
#include "scpf/event_sim.hpp"
#include "scpf/mc_sim.hpp"
#include "scpf/radio_env.hpp"
#include "scpf/shaping_game.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace scpf {

using json = nlohmann::json;

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

struct ResultRow {
  std::string scenario;
  std::string slice;
  std::string scheme;
  double sweep = nan_value;
  std::string metric;
  double value = nan_value;
  double stderr_value = nan_value;
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  std::vector<const ResultRow*> find(const std::string& metric, const std::string& slice = "",
                                     const std::string& scheme = "") const {
    std::vector<const ResultRow*> out;
    for (const auto& r : rows)
      if (r.metric == metric && (slice.empty() || r.slice == slice) && (scheme.empty() || r.scheme == scheme))
        out.push_back(&r);
    return out;
  }
};

inline constexpr const char* result_columns = "scenario,slice,scheme,sweep,metric,value,stderr,config_hash,seed";

namespace detail {

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline json json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json json_vec(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v[i]));
  return a;
}

}  // namespace detail

inline void write_csv(const ResultTable& t, std::ostream& os) {
  os << result_columns << '\n';
  for (const auto& r : t.rows)
    os << detail::csv_field(r.scenario) << ',' << detail::csv_field(r.slice) << ',' << detail::csv_field(r.scheme)
       << ',' << detail::csv_number(r.sweep) << ',' << detail::csv_field(r.metric) << ','
       << detail::csv_number(r.value) << ',' << detail::csv_number(r.stderr_value) << ',' << r.config_hash << ','
       << r.seed << '\n';
}

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<double> tol;
  std::optional<unsigned> threads;
};

namespace detail {

struct RowSink {
  const ScenarioConfig& cfg;
  std::uint64_t seed;
  ResultTable table;

  void add(const std::string& slice, const std::string& scheme, double sweep, const std::string& metric, double value,
           double err = nan_value) {
    table.rows.push_back({cfg.name, slice, scheme, sweep, metric, value, err, cfg.hash, seed});
  }
};

inline std::string slice_name(const ScenarioConfig& cfg, std::size_t v) {
  return v < cfg.slices.size() ? cfg.slices[v].name : "slice" + std::to_string(v);
}

inline std::uint64_t effective_seed(const ScenarioConfig& cfg, const RunOptions& o, bool mandatory) {
  if (o.seed) return *o.seed;
  if (mandatory && !cfg.seed_given) fail(ErrorCode::config, "stochastic commands need a seed (config 'seed' or --seed)");
  return cfg.seed;
}

inline LoadProfile sweep_profile(const ScenarioConfig& cfg, const LoadProfile& base, double x) {
  const auto& s = cfg.experiment.sweep;
  if (s.variable == "slice_load") return base.with_total(s.slice, x);
  return base.scaled(x);
}

inline TrafficModel scaled_model(const TrafficModel& m, double factor) {
  auto slices = m.slices();
  for (auto& s : slices) s.arrivals *= factor;
  return TrafficModel(BaseStationSet{m.stations()}, std::move(slices));
}

}  // namespace detail

/// Analytic mean BTDs and gains along the configured sweep.
inline ResultTable cmd_analyze(const ScenarioConfig& cfg, const RunOptions& o = {}) {
  detail::RowSink sink{cfg, detail::effective_seed(cfg, o, false), {}};
  for (const auto& g : cfg.geometry)
    sink.add(g.slice, "SCPF", nan_value, "gain_ss_heavy_geometry",
             gain_ss_heavy_from_geometry(g.slice_norm, g.aggregate_norm, g.angle_deg));
  if (cfg.slices.empty()) return std::move(sink.table);

  const auto base = load_profile(cfg);
  for (double x : cfg.experiment.sweep.values) {
    const auto p = detail::sweep_profile(cfg, base, x);
    for (std::size_t v = 0; v < p.size(); ++v) {
      if (!p.slice(v).has_relative()) continue;
      const auto name = detail::slice_name(cfg, v);
      for (Scheme sc : all_schemes) {
        sink.add(name, std::string(to_string(sc)), x, "btd", mean_btd(p, v, sc));
        sink.add(name, std::string(to_string(sc)), x, "normalized_btd", normalized_btd(p, v, sc));
      }
      sink.add(name, "SCPF", x, "load", p.slice(v).total);
      sink.add(name, "SCPF", x, "btd_asymptotic", mean_btd_scpf_asymptotic(p, v));
      sink.add(name, "SS", x, "gain", gain_ss(p, v));
      sink.add(name, "GPS", x, "gain", gain_gps(p, v));
      const auto lim = gain_limits(p, v);
      sink.add(name, "SS", x, "gain_light", lim.ss_light);
      sink.add(name, "SS", x, "gain_heavy", lim.ss_heavy);
      sink.add(name, "GPS", x, "gain_light", lim.gps_light);
      sink.add(name, "GPS", x, "gain_heavy", lim.gps_heavy);
      const auto geo = load_geometry(p, v);
      sink.add(name, "SCPF", x, "slice_norm", geo.slice_norm);
      sink.add(name, "SCPF", x, "aggregate_norm", geo.aggregate_norm);
      sink.add(name, "SCPF", x, "angle_deg", geo.angle_deg);
    }
    const auto all = overall_gains(p);
    sink.add("all", "SS", x, "gain", all.ss);
    sink.add("all", "GPS", x, "gain", all.gps);
    sink.add("all", "SS", x, "gain_heavy", all.ss_heavy);
    sink.add("all", "GPS", x, "gain_heavy", all.gps_heavy);
  }
  return std::move(sink.table);
}

/// Monte Carlo (Palm) or event-driven estimates next to the analytic values,
/// with a 3-standard-error agreement flag.
inline ResultTable cmd_simulate(const ScenarioConfig& cfg, const RunOptions& o = {}) {
  const auto seed = detail::effective_seed(cfg, o, true);
  const auto reps = o.reps.value_or(cfg.experiment.reps);
  const auto threads = o.threads.value_or(cfg.experiment.threads);
  detail::RowSink sink{cfg, seed, {}};
  const auto base = load_profile(cfg);
  const auto& sweep = cfg.experiment.sweep.values;

  const auto compare = [&](const std::string& name, Scheme sc, double x, double mean, double err, double exact) {
    sink.add(name, std::string(to_string(sc)), x, "btd_sim", mean, err);
    sink.add(name, std::string(to_string(sc)), x, "btd_analytic", exact);
    const double z = err > 0.0 ? (mean - exact) / err : (mean == exact ? 0.0 : nan_value);
    sink.add(name, std::string(to_string(sc)), x, "z_score", z);
    sink.add(name, std::string(to_string(sc)), x, "within_3sigma", std::abs(z) <= 3.0 ? 1.0 : 0.0);
  };

  if (cfg.experiment.simulate.mode == "palm") {
    for (std::size_t k = 0; k < sweep.size(); ++k) {
      const auto p = detail::sweep_profile(cfg, base, sweep[k]);
      for (std::size_t v = 0; v < p.size(); ++v) {
        if (!p.slice(v).has_relative()) continue;
        for (Scheme sc : all_schemes) {
          const auto stream = substream_seed(seed, (k * p.size() + v) * 3 + static_cast<std::size_t>(sc));
          const auto est = palm_estimate_btd(p, v, sc, reps, stream, threads);
          compare(detail::slice_name(cfg, v), sc, sweep[k], est.value, est.std_error, mean_btd(p, v, sc));
        }
      }
    }
    return std::move(sink.table);
  }

  const auto model0 = traffic_model(cfg);
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const auto model = detail::scaled_model(model0, sweep[k]);
    const auto p = derive_load_profile(model);
    EventSimOptions opt;
    opt.seed = substream_seed(seed, k);
    opt.warmup_fraction = cfg.experiment.simulate.warmup_fraction;
    opt.tag_probability = cfg.experiment.simulate.tag_probability;
    double slowest = 0.0;
    for (const auto& s : model.slices()) slowest = std::max(slowest, mean_system_time(s));
    opt.horizon = cfg.experiment.simulate.horizon > 0.0 ? cfg.experiment.simulate.horizon : 400.0 * slowest;
    const auto tr = run_event_sim(model, opt);
    for (std::size_t v = 0; v < model.size(); ++v) {
      const auto name = detail::slice_name(cfg, v);
      for (std::size_t b = 0; b < model.stations(); ++b) {
        const auto station = std::to_string(b);
        const double load = p.slice(v).load[static_cast<Eigen::Index>(b)];
        sink.add(name + "@" + station, "", sweep[k], "mean_count",
                 tr.mean_counts(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(b)));
        sink.add(name + "@" + station, "", sweep[k], "load", load);
        sink.add(name + "@" + station, "", sweep[k], "poisson_p_value",
                 poisson_goodness_of_fit(tr.samples(v, b), load).p_value);
      }
      if (opt.tag_probability == 0.0 || !p.slice(v).has_relative()) continue;
      for (Scheme sc : all_schemes) {
        const auto series = tr.btd_series(v, sc);
        if (series.size() < 40) continue;
        const auto [mean, err] = batch_mean_estimate(series);
        compare(name, sc, sweep[k], mean, err, mean_btd(p, v, sc));
      }
    }
  }
  return std::move(sink.table);
}

struct DimensionResult {
  ShareAllocation allocation;
  Mat coupling;
  Vec limits;
  std::optional<ShareCheck> check;
  json to_json(const ScenarioConfig& cfg) const;
};

inline json DimensionResult::to_json(const ScenarioConfig& cfg) const {
  json j;
  j["scenario"] = cfg.name;
  j["config_hash"] = cfg.hash;
  j["shares"] = detail::json_vec(allocation.shares);
  j["objective"] = detail::json_number(allocation.objective);
  j["status"] = to_string(allocation.status);
  json h = json::array();
  for (Eigen::Index i = 0; i < coupling.rows(); ++i) h.push_back(detail::json_vec(coupling.row(i).transpose()));
  j["coupling"] = h;
  j["slack"] = detail::json_vec(coupling * allocation.shares);
  if (limits.size() > 0) j["admissible_load"] = detail::json_vec(limits);
  if (check) {
    j["linearized_btd"] = detail::json_vec(check->linearized_btd);
    j["exact_btd"] = detail::json_vec(check->exact_btd);
  }
  return j;
}

/// Max-min shares from the configured slices (or an explicit coupling matrix).
inline DimensionResult cmd_dimension(const ScenarioConfig& cfg) {
  DimensionResult r;
  if (cfg.experiment.coupling) {
    r.coupling = *cfg.experiment.coupling;
    r.allocation = solve_maxmin_shares(r.coupling);
    return r;
  }
  const auto p = load_profile(cfg);
  std::vector<SliceDemand> demand;
  for (std::size_t v = 0; v < p.size(); ++v) {
    const auto& s = cfg.slices[v];
    if (!s.target) fail(ErrorCode::config, "slice " + s.name + " has no BTD target");
    demand.push_back({p.relative(v), p.slice(v).delta, p.slice(v).total, *s.target});
  }
  const auto cm = coupling_matrix(demand);
  r.coupling = cm.h;
  r.limits = cm.limits;
  r.allocation = solve_maxmin_shares(cm.h);
  r.check = verify_shares(r.allocation.shares, demand);
  return r;
}

struct GamePoint {
  double sweep;
  EquilibriumResult equilibrium;
};

struct GameRun {
  std::vector<GamePoint> points;
  std::optional<EquilibriumResult> saturated;
  ResultTable table;
  json to_json(const ScenarioConfig& cfg) const;
};

namespace detail {

inline json equilibrium_json(const EquilibriumResult& r) {
  json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["omega"] = json_number(r.omega);
  j["kkt_residual"] = json_number(r.kkt_residual);
  j["epsilon"] = r.epsilon;
  if (r.lambda.size() > 0) j["lambda"] = json_vec(r.lambda);
  j["unilateral_improvement"] = r.unilateral_improvement;
  json slices = json::array();
  for (const auto& s : r.slices) {
    json o;
    o["relative"] = json_vec(s.relative);
    o["load"] = json_number(s.load);
    o["relative_ss"] = json_vec(s.relative_ss);
    o["load_ss"] = json_number(s.load_ss);
    o["gain"] = json_number(s.gain);
    o["penalty"] = json_number(s.penalty);
    o["admission"] = json_vec(s.admission);
    slices.push_back(o);
  }
  j["slices"] = slices;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace detail

inline json GameRun::to_json(const ScenarioConfig& cfg) const {
  json j;
  j["scenario"] = cfg.name;
  j["config_hash"] = cfg.hash;
  json pts = json::array();
  for (const auto& p : points) {
    json o = detail::equilibrium_json(p.equilibrium);
    o["sweep"] = p.sweep;
    pts.push_back(o);
  }
  j["points"] = pts;
  if (saturated) j["saturated"] = detail::equilibrium_json(*saturated);
  return j;
}

/// Trace rows of every game run: sweep, k, omega, step, xi_norm, epsilon,
/// max_violation, lambda per slice.
inline void write_game_trace_csv(const GameRun& run, std::ostream& os) {
  std::size_t V = 0;
  for (const auto& p : run.points) V = std::max(V, p.equilibrium.slices.size());
  os << "sweep,k,omega,step,xi_norm,epsilon,max_violation";
  for (std::size_t v = 0; v < V; ++v) os << ",lambda_" << v;
  os << '\n';
  for (const auto& p : run.points)
    for (const auto& t : p.equilibrium.trace) {
      os << detail::csv_number(p.sweep) << ',' << t.k << ',' << detail::csv_number(t.omega) << ','
         << detail::csv_number(t.step) << ',' << detail::csv_number(t.xi_norm) << ','
         << detail::csv_number(t.epsilon) << ',' << detail::csv_number(t.max_violation);
      for (double l : t.lambda) os << ',' << detail::csv_number(l);
      os << '\n';
    }
}

/// GNEP equilibria along an arrival-rate sweep, with the saturated solution
/// as the high-arrival reference.
inline GameRun cmd_game(const ScenarioConfig& cfg, const RunOptions& o = {}) {
  detail::RowSink sink{cfg, detail::effective_seed(cfg, o, false), {}};
  auto params = cfg.experiment.game;
  if (o.tol) params.tol = *o.tol;
  const auto model = traffic_model(cfg);
  GameRun run;

  const auto sat_game = make_game(model);
  run.saturated = saturated_equilibrium(sat_game);
  for (std::size_t v = 0; v < model.size(); ++v) {
    const auto& s = run.saturated->slices[v];
    const auto name = detail::slice_name(cfg, v);
    sink.add(name, "saturated", nan_value, "load", s.load);
    sink.add(name, "saturated", nan_value, "load_ss", s.load_ss);
    sink.add(name, "saturated", nan_value, "gain", s.gain);
    sink.add(name, "saturated", nan_value, "relative_norm", s.relative.norm());
  }

  for (double x : cfg.experiment.sweep.values) {
    const auto g = make_game(detail::scaled_model(model, x));
    auto eq = solve_gnep(g, params);
    for (std::size_t v = 0; v < model.size(); ++v) {
      const auto& s = eq.slices[v];
      const auto name = detail::slice_name(cfg, v);
      sink.add(name, "SCPF", x, "load", s.load);
      sink.add(name, "SS", x, "load", s.load_ss);
      sink.add(name, "SCPF", x, "gain", s.gain);
      sink.add(name, "SCPF", x, "relative_norm", s.relative.norm());
      sink.add(name, "SCPF", x, "penalty", s.penalty);
      sink.add(name, "SCPF", x, "unilateral_improvement", eq.unilateral_improvement[v]);
    }
    Vec agg = Vec::Zero(static_cast<Eigen::Index>(model.stations()));
    for (std::size_t v = 0; v < model.size(); ++v) agg += g.slices[v].share * eq.slices[v].relative;
    sink.add("all", "SCPF", x, "relative_norm", agg.norm());
    sink.add("all", "SCPF", x, "omega", eq.omega);
    sink.add("all", "SCPF", x, "iterations", static_cast<double>(eq.iterations));
    run.points.push_back({x, std::move(eq)});
  }
  run.table = std::move(sink.table);
  return run;
}

struct RadioRun {
  std::vector<double> load_sweep;
  std::vector<RadioCalibration> calibrations;
  ResultTable table;
};

/// Radio simulation and calibration at each population multiplier.
inline RadioRun cmd_radio(const ScenarioConfig& cfg, const RunOptions& o = {}) {
  if (!cfg.radio) fail(ErrorCode::config, "the scenario has no radio block");
  const auto seed = detail::effective_seed(cfg, o, true);
  detail::RowSink sink{cfg, seed, {}};
  RadioRun run;
  run.load_sweep = cfg.radio->load_sweep;
  for (std::size_t k = 0; k < run.load_sweep.size(); ++k) {
    const double f = run.load_sweep[k];
    auto sc = cfg.radio->scenario;
    sc.seed = substream_seed(seed, k);
    for (auto& s : sc.slices)
      s.population = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(f * static_cast<double>(s.population))));
    auto cal = simulate_and_calibrate(sc);
    for (std::size_t v = 0; v < cal.slices.size(); ++v) {
      const auto& s = cal.slices[v];
      sink.add(s.name, "SCPF", f, "population", static_cast<double>(s.population));
      sink.add(s.name, "SCPF", f, "relative_norm", s.relative.norm());
      for (Scheme scheme : all_schemes) {
        const double meas = s.measured_btd[static_cast<std::size_t>(scheme)];
        const double pred = cal.predicted_btd(v, scheme);
        sink.add(s.name, std::string(to_string(scheme)), f, "btd_measured", meas);
        sink.add(s.name, std::string(to_string(scheme)), f, "btd_predicted", pred);
        sink.add(s.name, std::string(to_string(scheme)), f, "relative_error", std::abs(pred - meas) / meas);
      }
    }
    sink.add("all", "", f, "mean_sinr_db", cal.mean_sinr_db);
    run.calibrations.push_back(std::move(cal));
  }
  run.table = std::move(sink.table);
  return run;
}

}  // namespace scpf
