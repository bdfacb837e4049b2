// scpf_cli: analyze | simulate | dimension | game | radio
//
// Every subcommand reads one scenario file and writes its outputs under --out.

#include "scpf/scpf.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
  std::optional<std::size_t> reps;
  std::optional<unsigned> threads;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) scpf::fail(scpf::ErrorCode::config, "cannot write " + p.string());
  return os;
}

fs::path out_dir(const Globals& g, const scpf::ScenarioConfig& cfg) {
  fs::path dir = g.out.value_or(cfg.experiment.out);
  fs::create_directories(dir);
  return dir;
}

scpf::RunOptions run_options(const Globals& g) { return {g.seed, g.reps, g.tol, g.threads}; }

void write_table(const scpf::ResultTable& t, const fs::path& p) {
  auto os = open_out(p);
  scpf::write_csv(t, os);
  std::cout << "wrote " << p.string() << " (" << t.rows.size() << " rows)\n";
}

int run(const std::string& cmd, const Globals& g) {
  const auto cfg = scpf::load_config(g.config);
  const auto dir = out_dir(g, cfg);
  if (cmd == "analyze") {
    write_table(scpf::cmd_analyze(cfg, run_options(g)), dir / "analyze.csv");
  } else if (cmd == "simulate") {
    const auto t = scpf::cmd_simulate(cfg, run_options(g));
    write_table(t, dir / "simulate.csv");
    std::size_t failed = 0;
    for (const auto* r : t.find("within_3sigma"))
      if (r->value != 1.0) ++failed;
    std::cout << failed << " comparison(s) outside 3 standard errors\n";
  } else if (cmd == "dimension") {
    const auto r = scpf::cmd_dimension(cfg);
    auto os = open_out(dir / "dimension.json");
    os << r.to_json(cfg).dump(2) << '\n';
    std::cout << "t* = " << r.allocation.objective << " (" << scpf::to_string(r.allocation.status) << ")\n";
  } else if (cmd == "game") {
    const auto run = scpf::cmd_game(cfg, run_options(g));
    write_table(run.table, dir / "game.csv");
    {
      auto os = open_out(dir / "game_trace.csv");
      scpf::write_game_trace_csv(run, os);
    }
    auto os = open_out(dir / "game.json");
    os << run.to_json(cfg).dump(2) << '\n';
  } else if (cmd == "radio") {
    const auto run = scpf::cmd_radio(cfg, run_options(g));
    write_table(run.table, dir / "radio.csv");
    const auto seed = g.seed.value_or(cfg.seed);
    for (std::size_t k = 0; k < run.calibrations.size(); ++k) {
      const auto& cal = run.calibrations[k];
      const auto name = cfg.name + "_calibrated_" + std::to_string(k);
      auto os = open_out(dir / (name + ".yaml"));
      os << scpf::calibrated_config_yaml(cal, name, seed);
      if (!cal.trace.empty()) {
        auto ts = open_out(dir / (cfg.name + "_trace_" + std::to_string(k) + ".csv"));
        scpf::write_trace_csv(cal, ts);
      }
      for (const auto& w : cal.warnings) std::cerr << "warning: " << w << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Share-constrained proportionally fair slicing: analysis, simulation and games"};
  app.require_subcommand(1, 1);
  Globals g;
  app.add_option("--config", g.config, "scenario YAML file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides experiment.out)");
  app.add_option("--tol", g.tol, "solver tolerance");
  app.add_option("--reps", g.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();  // global flags may follow the subcommand
  app.add_subcommand("analyze", "analytic BTDs and gains along the sweep");
  app.add_subcommand("simulate", "Monte Carlo or event-driven checks against the analytic BTDs");
  app.add_subcommand("dimension", "max-min shares for the slice BTD targets");
  app.add_subcommand("game", "GNEP equilibria along an arrival-rate sweep");
  app.add_subcommand("radio", "radio simulation and model calibration");

  CLI11_PARSE(app, argc, argv);
  try {
    return run(app.get_subcommands().front()->get_name(), g);
  } catch (const scpf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
