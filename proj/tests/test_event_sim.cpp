#include "support.hpp"

#include "scpf/analytic_btd.hpp"
#include "scpf/event_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace scpf;
using scpf::testing::vec;

namespace {

SliceSpec open_slice(double share, Vec gamma, Mat q, Vec mu, SojournKind kind = SojournKind::exponential) {
  SliceSpec s;
  s.name = "s";
  s.share = share;
  s.arrivals = std::move(gamma);
  s.routing = std::move(q);
  s.sojourn = std::move(mu);
  s.delta = Vec::Ones(s.arrivals.size());
  s.sojourn_model.kind = kind;
  return s;
}

TrafficModel tandem_model() {
  Mat q = Mat::Zero(2, 2);
  q(0, 1) = 0.5;
  return TrafficModel(BaseStationSet{2}, {open_slice(1.0, vec({1, 0}), q, vec({1, 1}))});
}

double sample_mean(const std::vector<std::size_t>& xs) {
  double s = 0.0;
  for (auto x : xs) s += static_cast<double>(x);
  return s / static_cast<double>(xs.size());
}

}  // namespace

TEST(EventSim, LittlesLawSingleStation) {
  const TrafficModel m(BaseStationSet{1}, {open_slice(1.0, vec({1}), Mat::Zero(1, 1), vec({2}))});
  EventSimOptions opt;
  opt.horizon = 20000;
  opt.seed = 5;
  const auto tr = run_event_sim(m, opt);
  EXPECT_NEAR(tr.mean_counts(0, 0), 2.0, 0.04 * 2.0);
  const auto& xs = tr.samples(0, 0);
  EXPECT_NEAR(sample_mean(xs), 2.0, 3.0 * std::sqrt(2.0 / static_cast<double>(xs.size())));
  EXPECT_GT(poisson_goodness_of_fit(xs, 2.0).p_value, 0.01);
}

TEST(EventSim, TandemMatchesFlowConservation) {
  const auto m = tandem_model();
  const Vec rho = derive_load_profile(m).slice(0).load;
  EventSimOptions opt;
  opt.horizon = 30000;
  opt.seed = 6;
  const auto tr = run_event_sim(m, opt);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& xs = tr.samples(0, b);
    const double r = rho[static_cast<Eigen::Index>(b)];
    EXPECT_NEAR(sample_mean(xs), r, 3.0 * std::sqrt(r / static_cast<double>(xs.size()))) << "station " << b;
    EXPECT_NEAR(tr.mean_counts(0, static_cast<Eigen::Index>(b)), r, 0.03 * r);
    EXPECT_GT(poisson_goodness_of_fit(xs, r).p_value, 0.01);
  }
}

TEST(EventSim, InsensitiveToSojournDistribution) {
  Mat q(3, 3);
  q << 0.0, 0.3, 0.2, 0.1, 0.0, 0.4, 0.3, 0.3, 0.0;
  for (auto kind : {SojournKind::deterministic, SojournKind::lognormal}) {
    const TrafficModel m(BaseStationSet{3}, {open_slice(1.0, vec({0.6, 0.2, 0.2}), q, vec({1.0, 2.0, 1.5}), kind)});
    const Vec rho = derive_load_profile(m).slice(0).load;
    EventSimOptions opt;
    opt.horizon = 200000;
    opt.seed = 8;
    const auto tr = run_event_sim(m, opt);
    for (Eigen::Index b = 0; b < 3; ++b) {
      EXPECT_NEAR(tr.mean_counts(0, b), rho[b], 0.02 * rho[b]);
      EXPECT_GT(poisson_goodness_of_fit(tr.samples(0, static_cast<std::size_t>(b)), rho[b]).p_value, 0.01);
    }
  }
}

TEST(EventSim, ClosedPopulationMeanParity) {
  Mat q(2, 2);
  q << 0.0, 0.6, 0.3, 0.0;
  auto sl = open_slice(1.0, vec({1, 1}), q, vec({1.0, 3.0}));
  sl.population = 12;
  const TrafficModel m(BaseStationSet{2}, {sl});
  EventSimOptions opt;
  opt.horizon = 20000;
  opt.seed = 9;
  const auto tr = run_event_sim(m, opt);
  const Vec expected = closed_mean_occupancy(sl, 12);
  EXPECT_NEAR(expected.sum(), 12.0, 1e-12);
  for (Eigen::Index b = 0; b < 2; ++b) EXPECT_NEAR(tr.mean_counts(0, b), expected[b], 0.02 * expected[b]);
  EXPECT_EQ(tr.in_system, 12u);
}

TEST(EventSim, TaggedUsersSeeTheAnalyticBtd) {
  Mat q = Mat::Zero(2, 2);
  q(0, 1) = 0.4;
  q(1, 0) = 0.2;
  const TrafficModel m(BaseStationSet{2}, {open_slice(0.5, vec({1.0, 0.5}), q, vec({1.0, 1.0})),
                                           open_slice(0.5, vec({0.2, 1.5}), Mat::Zero(2, 2), vec({1.0, 1.0}))});
  const auto p = derive_load_profile(m);
  EventSimOptions opt;
  opt.horizon = 20000;
  opt.tag_probability = 0.3;
  opt.seed = 10;
  const auto tr = run_event_sim(m, opt);
  for (std::size_t v = 0; v < 2; ++v)
    for (Scheme sc : all_schemes) {
      const auto [mean, err] = batch_mean_estimate(tr.btd_series(v, sc));
      const double exact = mean_btd(p, v, sc);
      EXPECT_LE(std::abs(mean - exact), 3.0 * err) << "slice " << v << " " << to_string(sc) << ": " << mean << " +- "
                                                   << err << " vs " << exact;
    }
}

TEST(EventSim, DeterministicGivenSeed) {
  const auto m = tandem_model();
  EventSimOptions opt;
  opt.horizon = 500;
  opt.record_events = true;
  opt.tag_probability = 0.5;
  opt.seed = 3;
  const auto a = run_event_sim(m, opt), b = run_event_sim(m, opt);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].time, b.events[i].time);
    EXPECT_EQ(a.events[i].user, b.events[i].user);
  }
  EXPECT_EQ(a.btd.size(), b.btd.size());
  opt.seed = 4;
  EXPECT_NE(run_event_sim(m, opt).arrivals, a.arrivals);
}

TEST(EventSim, EventLogIsConsistent) {
  const auto m = tandem_model();
  EventSimOptions opt;
  opt.horizon = 1000;
  opt.record_events = true;
  const auto tr = run_event_sim(m, opt);
  std::size_t arrivals = 0, departures = 0;
  double last = 0.0;
  for (const auto& e : tr.events) {
    EXPECT_GE(e.time, last);
    last = e.time;
    arrivals += e.kind == EventKind::arrival;
    departures += e.kind == EventKind::departure;
    if (e.kind == EventKind::arrival) {
      EXPECT_EQ(e.station, 0u);  // gamma = (1, 0)
    } else if (e.kind == EventKind::handoff) {
      EXPECT_EQ(e.station, 1u);
    }
  }
  EXPECT_EQ(arrivals, tr.arrivals);
  EXPECT_EQ(departures, tr.departures);
  EXPECT_EQ(arrivals - departures, tr.in_system);
}

TEST(EventSim, ShortHorizonIsReported) {
  const auto m = tandem_model();
  EventSimOptions opt;
  opt.horizon = 20;
  try {
    run_event_sim(m, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::horizon_too_short);
  }
}

TEST(EventSim, BtdCsvHeader) {
  const auto m = tandem_model();
  EventSimOptions opt;
  opt.horizon = 300;
  opt.tag_probability = 1.0;
  const auto tr = run_event_sim(m, opt);
  std::ostringstream os;
  write_btd_csv(tr, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "time,slice,station,user_id,scheme,btd");
}

TEST(GoodnessOfFit, DetectsNonPoissonSamples) {
  std::vector<std::size_t> constant(500, 3);
  EXPECT_LT(poisson_goodness_of_fit(constant, 3.0).p_value, 1e-6);
  auto rng = make_stream(77, 0);
  std::poisson_distribution<std::size_t> pois(3.0);
  std::vector<std::size_t> good(2000);
  for (auto& x : good) x = pois(rng);
  EXPECT_GT(poisson_goodness_of_fit(good, 3.0).p_value, 0.01);
}

TEST(BatchMeans, IndependentSeriesMatchesPlainStandardError) {
  auto rng = make_stream(78, 0);
  std::normal_distribution<double> z(1.0, 2.0);
  std::vector<double> xs(40000);
  MomentAccumulator acc;
  for (auto& x : xs) acc.add(x = z(rng));
  const auto [mean, err] = batch_mean_estimate(xs);
  EXPECT_DOUBLE_EQ(mean, acc.mean());
  EXPECT_NEAR(err / acc.standard_error(), 1.0, 0.4);
}
