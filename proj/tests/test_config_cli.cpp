#include "support.hpp"

#include "scpf/config.hpp"
#include "scpf/experiments.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace scpf;
using scpf::testing::source_path;
using scpf::testing::vec;

namespace {

std::string error_of(const std::string& yaml) {
  try {
    parse_config(yaml);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
    return e.what();
  }
  ADD_FAILURE() << "no error for:\n" << yaml;
  return {};
}

const char* two_slices = R"(name: t
seed: 5
stations: 2
slices:
  - {name: a, share: 1/3, loads: 0.5}
  - {name: b, share: 2/3, arrivals: [1, 0], routing: [[0, 0.5], [0, 0]], sojourn: [1, 2]}
)";

}  // namespace

TEST(Config, FractionsBroadcastAndFlowConservation) {
  const auto cfg = parse_config(two_slices);
  ASSERT_EQ(cfg.slices.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.slices[0].share, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(cfg.slices[1].share, 2.0 / 3.0);
  EXPECT_TRUE(cfg.seed_given);
  const auto p = load_profile(cfg);
  EXPECT_EQ(p.slice(0).load, vec({0.5, 0.5}));
  // tandem: rho = (1 * 1, 0.5 * 2)
  EXPECT_NEAR(p.slice(1).load[0], 1.0, 1e-12);
  EXPECT_NEAR(p.slice(1).load[1], 1.0, 1e-12);
}

TEST(Config, UnknownKeyReportsItsLine) {
  const auto msg = error_of("name: x\nstations: 1\nslices:\n  - {share: 1, loads: [1]}\nexperimnt: {}\n");
  EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("experimnt"), std::string::npos) << msg;
  const auto nested = error_of("stations: 1\nslices:\n  - share: 1\n    loads: [1]\n    delay: 2\n");
  EXPECT_NE(nested.find("line 5"), std::string::npos) << nested;
}

TEST(Config, RejectsMalformedScenarios) {
  error_of("stations: 2\nslices:\n  - {share: 1, loads: [1, 2, 3]}\n");
  error_of("stations: 1\nslices:\n  - {share: 1/0, loads: [1]}\n");
  error_of("stations: 1\nslices:\n  - {share: 0.5, loads: [1]}\n");
  error_of("stations: 1\nslices:\n  - {share: 1, loads: [1], arrivals: [1]}\n");
  error_of("stations: 2\nslices:\n  - {share: 1, loads: [1, 1], routing: [[0, 1], [0, 0]]}\n");
  error_of("stations: 1\nslices:\n  - {share: 1}\n");
  error_of("name: empty\n");
  error_of("stations: 1\nslices:\n  - {share: 1, loads: [1]}\nexperiment: {sweep: {variable: speed}}\n");
  error_of("stations: 1\nslices: [ {share: 1, loads: [1]\n");
}

TEST(Config, GridRoutingAndSweepRanges) {
  const auto cfg = parse_config(R"(stations: 4
slices:
  - share: 1
    arrivals: 0.1
    routing: {grid: {rows: 2, cols: 2, exit: 0.2}}
experiment:
  sweep: {from: 1, to: 100, points: 3, log: true}
)");
  EXPECT_NEAR(cfg.slices[0].routing.row(0).sum(), 0.8, 1e-12);
  ASSERT_EQ(cfg.experiment.sweep.values.size(), 3u);
  EXPECT_NEAR(cfg.experiment.sweep.values[1], 10.0, 1e-12);
  error_of("stations: 3\nslices:\n  - {share: 1, arrivals: 1, routing: {grid: {rows: 2, cols: 2, exit: 0.2}}}\n");
}

TEST(Config, HashIsStableAndContentSensitive) {
  const auto a = parse_config(two_slices).hash;
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, parse_config(two_slices).hash);
  EXPECT_NE(a, parse_config(std::string(two_slices) + "# comment\n").hash);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* f : {"orthogonal", "single_slice", "regression", "event", "fig5_game", "radio", "dimension",
                        "dimension_identity", "table2_scenario3"})
    EXPECT_NO_THROW(load_config(source_path(std::string("configs/") + f + ".yaml"))) << f;
}

TEST(Analyze, OrthogonalGainIsTwoAtEveryLoad) {
  const auto t = cmd_analyze(load_config(source_path("configs/orthogonal.yaml")));
  const auto rows = t.find("gain", "left", "SS");
  ASSERT_EQ(rows.size(), 20u);
  for (const auto* r : rows) EXPECT_NEAR(r->value, 2.0, 1e-9) << "sweep " << r->sweep;
}

TEST(Analyze, SingleSliceGainsAreOne) {
  const auto t = cmd_analyze(load_config(source_path("configs/single_slice.yaml")));
  for (const char* m : {"gain", "gain_light", "gain_heavy"})
    for (const auto* r : t.find(m, "only")) EXPECT_NEAR(r->value, 1.0, 1e-12) << m;
}

TEST(Analyze, GeometryRows) {
  const auto t = cmd_analyze(load_config(source_path("configs/table2_scenario3.yaml")));
  const auto rows = t.find("gain_ss_heavy_geometry", "s3");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0]->value, 1.83, 0.05 * 1.83);
}

TEST(Analyze, CsvLayout) {
  const auto cfg = load_config(source_path("configs/single_slice.yaml"));
  std::ostringstream os;
  write_csv(cmd_analyze(cfg), os);
  std::istringstream in(os.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "scenario,slice,scheme,sweep,metric,value,stderr,config_hash,seed");
  EXPECT_NE(first.find(cfg.hash), std::string::npos);
}

TEST(Simulate, NeedsASeed) {
  auto cfg = load_config(source_path("configs/single_slice.yaml"));
  ASSERT_FALSE(cfg.seed_given);
  EXPECT_THROW(cmd_simulate(cfg), Error);
  RunOptions o;
  o.seed = 3;
  o.reps = 2000;
  EXPECT_NO_THROW(cmd_simulate(cfg, o));
}

TEST(Simulate, RerunsAreBitIdentical) {
  const auto cfg = load_config(source_path("configs/regression.yaml"));
  RunOptions o;
  o.reps = 5000;
  std::ostringstream a, b;
  write_csv(cmd_simulate(cfg, o), a);
  write_csv(cmd_simulate(cfg, o), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Simulate, RegressionScenarioWithinThreeSigma) {
  const auto t = cmd_simulate(load_config(source_path("configs/regression.yaml")));
  const auto rows = t.find("within_3sigma");
  ASSERT_EQ(rows.size(), 18u);
  for (const auto* r : rows) EXPECT_EQ(r->value, 1.0) << r->slice << " " << r->scheme << " at " << r->sweep;
}

TEST(Simulate, EventModeReportsPoissonFits) {
  const auto t = cmd_simulate(load_config(source_path("configs/event.yaml")));
  const auto p = t.find("poisson_p_value");
  ASSERT_FALSE(p.empty());
  for (const auto* r : p) EXPECT_GT(r->value, 1e-4) << r->slice << " at " << r->sweep;
}

TEST(Dimension, IdentityCouplingSplitsEvenly) {
  const auto r = cmd_dimension(load_config(source_path("configs/dimension_identity.yaml")));
  for (int v = 0; v < 3; ++v) EXPECT_NEAR(r.allocation.shares[v], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(r.allocation.status, Admissibility::admissible);
}

TEST(Dimension, DerivedCouplingIsAdmissibleAndSerializes) {
  const auto cfg = load_config(source_path("configs/dimension.yaml"));
  const auto r = cmd_dimension(cfg);
  ASSERT_TRUE(r.check.has_value());
  EXPECT_NEAR(r.allocation.shares.sum(), 1.0, 1e-12);
  const auto j = r.to_json(cfg);
  EXPECT_EQ(j["shares"].size(), cfg.slices.size());
  EXPECT_EQ(j["config_hash"], cfg.hash);
}

TEST(Radio, CalibratedConfigRoundTrips) {
  RadioScenario sc;
  sc.layout.rings = 1;
  sc.channel.fading_samples = 1;
  sc.horizon_s = 200;
  sc.warmup_s = 20;
  RadioSlice s;
  s.name = "all";
  s.population = 20;
  sc.slices = {s};
  const auto cal = simulate_and_calibrate(sc);
  const auto cfg = parse_config(calibrated_config_yaml(cal, "cal", 4));
  ASSERT_EQ(cfg.stations, cal.sectors);
  const auto& a = cfg.slices[0];
  const auto& b = cal.slices[0];
  EXPECT_EQ(a.arrivals, b.arrivals);
  EXPECT_EQ(a.sojourn, b.sojourn);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.routing, b.routing);
  EXPECT_EQ(a.population, b.population);
}

TEST(Radio, CommandNeedsARadioBlock) {
  RunOptions o;
  o.seed = 1;
  EXPECT_THROW(cmd_radio(load_config(source_path("configs/single_slice.yaml")), o), Error);
}
