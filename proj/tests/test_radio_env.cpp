#include "support.hpp"

#include "scpf/radio_env.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace scpf;

namespace {

RadioScenario small_scenario(std::uint64_t seed = 3) {
  RadioScenario sc;
  sc.layout.rings = 1;
  sc.channel.fading_samples = 2;
  sc.horizon_s = 500;
  sc.warmup_s = 50;
  sc.seed = seed;
  RadioSlice roam;
  roam.name = "roam";
  roam.share = 0.5;
  roam.population = 12;
  RadioSlice hot;
  hot.name = "hot";
  hot.share = 0.5;
  hot.population = 12;
  hot.mobility.kind = MobilityModel::Kind::hotspot_waypoint;
  hot.mobility.hotspots = {{{150.0, 50.0}, 60.0, 1.0}};
  sc.slices = {roam, hot};
  return sc;
}

}  // namespace

TEST(PathLoss, ReferenceValues) {
  EXPECT_NEAR(path_loss_db(1.0, 1.0), 22.7, 1e-12);
  EXPECT_NEAR(path_loss_db(200.0, 2.5), 117.494, 0.01);
  EXPECT_NEAR(path_loss_db(500.0, 2.5) - path_loss_db(50.0, 2.5), 36.7, 1e-10);
  try {
    path_loss_db(0.0, 2.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::nonpositive_distance);
  }
  EXPECT_THROW(path_loss_db(-3.0, 2.5), Error);
}

TEST(Layout, NineteenSitesFiftySevenSectors) {
  HexLayout l;
  EXPECT_EQ(l.sites().size(), 19u);
  const auto s = l.sectors();
  ASSERT_EQ(s.size(), 57u);
  EXPECT_DOUBLE_EQ(l.sites()[0].x, 0.0);
  EXPECT_DOUBLE_EQ(l.sites()[0].y, 0.0);
  // nearest neighbours sit one inter-site distance away
  for (std::size_t i = 1; i <= 6; ++i) EXPECT_NEAR(std::hypot(l.sites()[i].x, l.sites()[i].y), 200.0, 1e-9);
  EXPECT_EQ(s[3].site, 1u);
  EXPECT_NEAR(s[1].boresight_deg - s[0].boresight_deg, 120.0, 1e-12);
  l.rings = 1;
  EXPECT_EQ(l.sites().size(), 7u);
}

TEST(Antenna, PatternPeaksOnBoresightAndClips) {
  ChannelParams ch;
  EXPECT_DOUBLE_EQ(antenna_gain_db(ch, 0.0, 3), ch.antenna_gain_dbi);
  EXPECT_NEAR(antenna_gain_db(ch, 35.0, 3), ch.antenna_gain_dbi - 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(antenna_gain_db(ch, 180.0, 3), ch.antenna_gain_dbi - ch.front_to_back_db);
  EXPECT_NEAR(antenna_gain_db(ch, 350.0, 3), antenna_gain_db(ch, -10.0, 3), 1e-12);
  EXPECT_DOUBLE_EQ(antenna_gain_db(ch, 120.0, 1), ch.antenna_gain_dbi);
}

TEST(Sinr, NoiseOnlyAndEqualInterferer) {
  const double noise = db_to_linear(-100.0);
  const double p = db_to_linear(-70.0);
  EXPECT_NEAR(linear_to_db(sinr({p}, 0, noise)), 30.0, 1e-10);
  EXPECT_NEAR(linear_to_db(sinr({p, p}, 0, noise)), -linear_to_db(1.0 + 1e-3), 1e-12);
  EXPECT_THROW(sinr({p}, 1, noise), Error);
}

TEST(Sinr, DecreasesFromCenterToEdge) {
  const HexLayout l;
  const auto sectors = l.sectors();
  const ChannelParams ch;
  const double noise = db_to_linear(ch.noise_db);
  const double dir = sectors[0].boresight_deg * std::numbers::pi / 180.0;
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 20.0; r <= 100.0; r += 10.0) {
    const auto rx_db = large_scale_rx_db(l, sectors, ch, {r * std::cos(dir), r * std::sin(dir)}, {});
    std::vector<double> rx(rx_db.size());
    for (std::size_t b = 0; b < rx.size(); ++b) rx[b] = db_to_linear(rx_db[b]);
    const double s = sinr(rx, 0, noise);
    EXPECT_LT(s, prev) << "r = " << r;
    prev = s;
  }
}

TEST(RateMap, MonotoneAndClamped) {
  RateMap m;
  double prev = 0.0;
  for (double db = -20.0; db <= 30.0; db += 0.5) {
    const double r = m.rate(db_to_linear(db));
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_DOUBLE_EQ(m.rate(db_to_linear(-30.0)), m.rate(db_to_linear(-10.0)));
  EXPECT_NEAR(m.rate(db_to_linear(25.0)), std::log2(1.0 + 100.0), 1e-12);

  RateMap t;
  t.kind = RateMap::Kind::table;
  t.table = {{-5.0, 0.2}, {0.0, 0.5}, {10.0, 2.0}};
  t.validate();
  EXPECT_DOUBLE_EQ(t.rate(db_to_linear(-9.0)), 0.2);
  EXPECT_DOUBLE_EQ(t.rate(db_to_linear(3.0)), 0.5);
  EXPECT_DOUBLE_EQ(t.rate(db_to_linear(12.0)), 2.0);
  t.table = {{0.0, 1.0}, {5.0, 0.5}};
  EXPECT_THROW(t.validate(), Error);
  t.table = {{5.0, 1.0}, {0.0, 2.0}};
  EXPECT_THROW(t.validate(), Error);
}

class Calibration : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { cal_ = new RadioCalibration(simulate_and_calibrate(small_scenario())); }
  static void TearDownTestSuite() {
    delete cal_;
    cal_ = nullptr;
  }
  static RadioCalibration* cal_;
};
RadioCalibration* Calibration::cal_ = nullptr;

TEST_F(Calibration, CalibratedSlicesAreWellFormed) {
  const auto& cal = *cal_;
  ASSERT_EQ(cal.sectors, 21u);
  ASSERT_EQ(cal.slices.size(), 2u);
  for (const auto& s : cal.slices) {
    EXPECT_NEAR(s.relative.sum(), 1.0, 1e-12);
    EXPECT_GE(s.relative.minCoeff(), 0.0);
    EXPECT_GT(s.delta.minCoeff(), 0.0);
    EXPECT_GT(s.sojourn.minCoeff(), 0.0);
    EXPECT_GE(s.routing.minCoeff(), 0.0);
    EXPECT_LE(s.routing.rowwise().sum().maxCoeff(), 0.9 + 1e-12);
    EXPECT_GE(s.arrivals.minCoeff(), 0.0);
    for (double b : s.measured_btd) EXPECT_GT(b, 0.0);
  }
  EXPECT_NO_THROW(cal.traffic_model());
}

TEST_F(Calibration, HotspotSliceIsMoreConcentrated) {
  const double uniform_norm = 1.0 / std::sqrt(21.0);
  EXPECT_LT(cal_->slices[0].relative.norm(), 1.5 * uniform_norm);
  EXPECT_GT(cal_->slices[1].relative.norm(), cal_->slices[0].relative.norm());
  EXPECT_GT(cal_->slices[1].relative.norm(), uniform_norm);
}

TEST_F(Calibration, PredictionTracksMeasurement) {
  for (std::size_t v = 0; v < 2; ++v) {
    const double pred = cal_->predicted_btd(v), meas = cal_->slices[v].measured_btd[0];
    EXPECT_NEAR(pred / meas, 1.0, 0.15) << "slice " << v;
  }
}

TEST(RadioSim, DeterministicGivenSeed) {
  auto sc = small_scenario(9);
  sc.horizon_s = 150;
  const auto a = simulate_and_calibrate(sc), b = simulate_and_calibrate(sc);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(a.slices[v].relative, b.slices[v].relative);
    EXPECT_EQ(a.slices[v].delta, b.slices[v].delta);
    EXPECT_EQ(a.slices[v].measured_btd, b.slices[v].measured_btd);
  }
  sc.seed = 10;
  EXPECT_NE(simulate_and_calibrate(sc).slices[0].relative, a.slices[0].relative);
}

TEST(RadioSim, StarvedSectorsAreReported) {
  auto sc = small_scenario();
  sc.horizon_s = 60;
  sc.warmup_s = 10;
  sc.min_sector_samples = 10000;
  try {
    simulate_and_calibrate(sc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
  }
}

TEST(RadioSim, RejectsBadScenarios) {
  auto sc = small_scenario();
  sc.slices[0].share = 0.9;
  EXPECT_THROW(simulate_and_calibrate(sc), Error);
  sc = small_scenario();
  sc.warmup_s = sc.horizon_s;
  EXPECT_THROW(simulate_and_calibrate(sc), Error);
}

TEST(RadioSim, TraceCsv) {
  auto sc = small_scenario();
  sc.horizon_s = 300;
  sc.warmup_s = 10;
  sc.record_trace = true;
  const auto cal = simulate_and_calibrate(sc);
  EXPECT_EQ(cal.trace.size(), 290u * 24u);
  std::ostringstream os;
  write_trace_csv(cal, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "time,user,slice,x,y,sector,rate");
}
