#include "support.hpp"

#include "scpf/analytic_btd.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace scpf;
using scpf::testing::vec;

namespace {

LoadProfile single(double rho) { return LoadProfile::from_loads({1.0}, {vec({rho})}, {vec({1.0})}); }

// Exact Palm expectation of delta_b / f by summing over all count vectors of a
// small instance, Poisson tails truncated at `cap`.
double enumerated_btd(const LoadProfile& p, std::size_t v, Scheme scheme, int cap = 30) {
  const std::size_t V = p.size(), B = p.stations(), cells = V * B;
  std::vector<double> rho(cells);
  for (std::size_t u = 0; u < V; ++u)
    for (std::size_t b = 0; b < B; ++b) rho[u * B + b] = p.slice(u).load[static_cast<Eigen::Index>(b)];
  std::vector<std::vector<double>> pmf(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    double q = std::exp(-rho[c]);
    for (int n = 0; n <= cap; ++n) {
      pmf[c].push_back(q);
      q *= rho[c] / (n + 1);
      if (rho[c] == 0.0) q = 0.0;
    }
  }
  const auto shares = p.shares();
  const Vec& rel = p.relative(v);
  std::vector<int> n(cells, 0);
  double total = 0.0;
  for (;;) {
    double prob = 1.0;
    for (std::size_t c = 0; c < cells; ++c) prob *= pmf[c][static_cast<std::size_t>(n[c])];
    if (prob > 0.0) {
      for (std::size_t b = 0; b < B; ++b) {
        const double w = rel[static_cast<Eigen::Index>(b)];
        if (w == 0.0) continue;
        auto count = [&](std::size_t u, std::size_t c) { return n[u * B + c] + (u == v && c == b ? 1 : 0); };
        double f = 0.0;
        if (scheme == Scheme::ss) {
          f = shares[v] / count(v, b);
        } else if (scheme == Scheme::gps) {
          double act = 0.0;
          for (std::size_t u = 0; u < V; ++u) act += count(u, b) > 0 ? shares[u] : 0.0;
          f = shares[v] / (count(v, b) * act);
        } else {
          std::vector<double> tot(V, 0.0);
          for (std::size_t u = 0; u < V; ++u)
            for (std::size_t c = 0; c < B; ++c) tot[u] += count(u, c);
          double wsum = 0.0;
          for (std::size_t u = 0; u < V; ++u)
            if (count(u, b) > 0) wsum += count(u, b) * shares[u] / tot[u];
          f = shares[v] / tot[v] / wsum;
        }
        total += prob * w * p.slice(v).delta[static_cast<Eigen::Index>(b)] / f;
      }
    }
    std::size_t c = 0;
    while (c < cells && ++n[c] > cap) n[c++] = 0;
    if (c == cells) break;
  }
  return total;
}

}  // namespace

TEST(MeanBtd, SingleStationCollapse) {
  for (Scheme sc : all_schemes) EXPECT_NEAR(mean_btd(single(2.0), 0, sc), 3.0, 1e-14);
}

TEST(MeanBtd, LoneUserGetsFullResource) {
  for (Scheme sc : all_schemes) EXPECT_NEAR(mean_btd(single(1e-12), 0, sc), 1.0, 1e-11);
}

TEST(MeanBtd, SingleSliceSsEqualsGps) {
  const auto p = LoadProfile::from_loads({1.0}, {vec({0.5, 2.0, 1.5})}, {vec({1.0, 2.0, 0.5})});
  const Vec rel = p.relative(0);
  double expected = 0.0;
  for (int b = 0; b < 3; ++b) expected += rel[b] * p.slice(0).delta[b] * (p.slice(0).load[b] + 1.0);
  EXPECT_NEAR(mean_btd_ss(p, 0), expected, 1e-13);
  EXPECT_NEAR(mean_btd_gps(p, 0), expected, 1e-13);
}

TEST(MeanBtd, GpsBelowSsByIdleShareOnDisjointSupport) {
  const auto p = LoadProfile::from_loads({0.5, 0.5}, {vec({2, 0}), vec({0, 3})}, {vec({1, 1}), vec({1, 1})});
  // slice 1 is never present at station 0, so s-bar_0^0 = 1/2
  EXPECT_NEAR(station_btd(p, 0, 0, Scheme::gps), 0.5 * station_btd(p, 0, 0, Scheme::ss), 1e-14);
  EXPECT_LT(mean_btd_gps(p, 0), mean_btd_ss(p, 0));
}

TEST(MeanBtd, MatchesExactEnumerationOnSmallInstances) {
  auto rng = make_stream(404, 0);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t V = 2, B = 2;
    std::vector<Vec> loads, deltas;
    for (std::size_t v = 0; v < V; ++v) {
      loads.push_back(scpf::testing::random_load(rng, B, 2.0, 0.2));
      deltas.push_back(scpf::testing::random_delta(rng, B));
    }
    const auto p = LoadProfile::from_loads(scpf::testing::random_shares(rng, V), loads, deltas);
    for (std::size_t v = 0; v < V; ++v)
      for (Scheme sc : all_schemes) {
        const double exact = enumerated_btd(p, v, sc);
        EXPECT_NEAR(mean_btd(p, v, sc), exact, 1e-9 * exact) << "trial " << trial << " slice " << v << " "
                                                             << to_string(sc);
      }
  }
}

TEST(AsymptoticBtd, SingleStationLeadingTerm) {
  EXPECT_NEAR(mean_btd_scpf_asymptotic(single(10.0), 0), 10.0, 1e-13);
  EXPECT_NEAR(mean_btd_scpf(single(10.0), 0), 11.0, 1e-12);
}

TEST(AsymptoticBtd, OrthogonalSlices) {
  const auto p = LoadProfile::from_loads({0.5, 0.5}, {vec({10, 10, 0, 0}), vec({0, 0, 10, 10})},
                                         {Vec::Ones(4), Vec::Ones(4)});
  // (20 / 0.5) * <(1/2,1/2,0,0), (1/4,1/4,1/4,1/4)>
  EXPECT_NEAR(mean_btd_scpf_asymptotic(p, 0), 10.0, 1e-13);
}

TEST(AsymptoticBtd, RatioTendsToOne) {
  auto rng = make_stream(405, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = scpf::testing::random_profile(rng, 3, 5);
    for (std::size_t v = 0; v < inst.slices; ++v) {
      // every slice heavily loaded, so the activity factors have saturated too
      double smallest = std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u < inst.slices; ++u) smallest = std::min(smallest, inst.profile.slice(u).total);
      const auto p = inst.profile.scaled(1e5 / smallest);
      EXPECT_NEAR(mean_btd_scpf_asymptotic(p, v) / mean_btd_scpf(p, v), 1.0, 0.02);
    }
  }
}

TEST(Gains, SingleSliceGainIsOne) {
  const auto p = LoadProfile::from_loads({1.0}, {vec({0.3, 4.0})}, {vec({1.0, 2.0})});
  EXPECT_NEAR(gain_ss(p, 0), 1.0, 1e-14);
  EXPECT_NEAR(gain_gps(p, 0), 1.0, 1e-14);
}

TEST(Gains, OrthogonalHeavyLoadGainApproachesTwo) {
  const auto p = LoadProfile::from_loads({0.5, 0.5}, {vec({1e6, 0}), vec({0, 1e6})}, {Vec::Ones(2), Vec::Ones(2)});
  EXPECT_NEAR(gain_ss(p, 0), 2.0, 1e-5);
  EXPECT_NEAR(gain_limits(p, 0).ss_heavy, 2.0, 1e-14);
}

TEST(Gains, ClosedFormsAgreeWithRatios) {
  auto rng = make_stream(406, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = scpf::testing::random_profile(rng);
    for (std::size_t v = 0; v < inst.slices; ++v) {
      const auto& p = inst.profile;
      EXPECT_NEAR(gain_ss_closed_form(p, v), gain_ss(p, v), 1e-10 * gain_ss(p, v));
      EXPECT_NEAR(gain_gps_closed_form(p, v), gain_gps(p, v), 1e-10 * gain_gps(p, v));
    }
  }
}

TEST(GainLimits, LightAndHeavyLimitsAreApproached) {
  auto rng = make_stream(407, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = scpf::testing::random_profile(rng);
    for (std::size_t v = 0; v < inst.slices; ++v) {
      const auto light = inst.profile.with_total(v, 1e-9);
      const auto lim_l = gain_limits(light, v);
      EXPECT_NEAR(gain_ss(light, v), lim_l.ss_light, 1e-7 * lim_l.ss_light);
      EXPECT_NEAR(gain_gps(light, v), lim_l.gps_light, 1e-7 * lim_l.gps_light);

      const auto heavy = inst.profile.scaled(1e7 / inst.profile.slice(v).total);
      const auto lim_h = gain_limits(heavy, v);
      EXPECT_NEAR(gain_ss(heavy, v), lim_h.ss_heavy, 1e-4 * lim_h.ss_heavy);
      EXPECT_NEAR(gain_gps(heavy, v), lim_h.gps_heavy, 1e-4 * lim_h.gps_heavy);
    }
  }
}

TEST(GainLimits, IdenticalRelativeLoadsGiveUnitHeavyGain) {
  const auto p = LoadProfile::from_loads({0.3, 0.7}, {vec({1, 2, 3}), vec({3, 6, 9})},
                                         {Vec::Ones(3), Vec::Ones(3)});
  EXPECT_NEAR(gain_limits(p, 0).ss_heavy, 1.0, 1e-14);
  EXPECT_NEAR(overall_gains(p).ss_heavy, 1.0, 1e-14);
}

TEST(GainLimits, GpsHeavyTendsToSsHeavyWhenAllStationsBusy) {
  const auto p = LoadProfile::from_loads({0.5, 0.5}, {vec({500, 200}), vec({100, 500})}, {Vec::Ones(2), Vec::Ones(2)});
  const auto g = gain_limits(p, 0);
  EXPECT_NEAR(g.gps_heavy, g.ss_heavy, 1e-6);
}

TEST(GainLimits, TableTwoRowsFromGeometry) {
  struct Row {
    double slice, aggregate, angle, gain;
  };
  for (const Row& r : {Row{0.27, 0.27, 7.09, 1.01}, Row{0.32, 0.32, 6.18, 1.01}, Row{0.36, 0.26, 41.78, 1.83},
                       Row{0.36, 0.23, 25.52, 1.70}, Row{0.19, 0.23, 48.00, 1.24}})
    EXPECT_NEAR(gain_ss_heavy_from_geometry(r.slice, r.aggregate, r.angle), r.gain, 0.05 * r.gain);
}

TEST(GainLimits, GeometryFormMatchesProfileOnUnitCapacities) {
  auto rng = make_stream(408, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = scpf::testing::random_profile(rng);
    std::vector<Vec> loads = inst.profile.load_vectors(), ones(inst.slices, Vec::Ones(static_cast<Eigen::Index>(inst.stations)));
    const auto p = LoadProfile::from_loads(inst.profile.shares(), loads, ones);
    for (std::size_t v = 0; v < inst.slices; ++v) {
      const auto geo = load_geometry(p, v);
      const double ref = gain_limits(p, v).ss_heavy;
      EXPECT_NEAR(gain_ss_heavy_from_geometry(geo.slice_norm, geo.aggregate_norm, geo.angle_deg), ref, 1e-9 * ref);
    }
  }
}

TEST(OverallGains, OrthogonalSlicesReachV) {
  for (std::size_t V = 1; V <= 5; ++V) {
    std::vector<Vec> loads, deltas;
    for (std::size_t v = 0; v < V; ++v) {
      Vec l = Vec::Zero(static_cast<Eigen::Index>(V));
      l[static_cast<Eigen::Index>(v)] = 3.0;
      loads.push_back(l);
      deltas.push_back(Vec::Ones(static_cast<Eigen::Index>(V)));
    }
    std::vector<double> shares(V, 1.0 / static_cast<double>(V));
    double head = 0.0;
    for (std::size_t v = 0; v + 1 < V; ++v) head += shares[v];
    shares.back() = 1.0 - head;
    EXPECT_NEAR(overall_gains(LoadProfile::from_loads(shares, loads, deltas)).ss_heavy, static_cast<double>(V), 1e-12);
  }
}

TEST(Corollaries, RandomInstanceProperties) {
  auto rng = make_stream(409, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = scpf::testing::random_profile(rng, 4, 6);
    const auto& p = inst.profile;
    for (std::size_t v = 0; v < inst.slices; ++v) {
      if (inst.slices > 1) {
        EXPECT_GT(gain_limits(p, v).ss_light, 1.0);
      }
      double prev = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 20; ++k) {
        const double rho = std::pow(10.0, -2.0 + 5.0 * k / 19.0);
        const double g = gain_ss(p.with_total(v, rho), v);
        EXPECT_LE(g, prev * (1.0 + 1e-12)) << "trial " << trial << " rho " << rho;
        prev = g;
      }
    }
    // heavy-load forms hold in the limit where idle shares reduce to absent slices
    const auto all = overall_gains(p.scaled(1e6));
    EXPECT_GE(all.ss_heavy, 1.0 - 1e-9);
    EXPECT_GE(all.gps_heavy, 1.0 - 1e-9);
  }
}

TEST(NormalizedBtd, ScalesMeanBtdOnUniformCapacities) {
  const auto p = LoadProfile::from_loads({0.4, 0.6}, {vec({1, 2}), vec({2, 1})}, {vec({2, 2}), vec({1, 1})});
  for (Scheme sc : all_schemes)
    EXPECT_NEAR(normalized_btd(p, 0, sc), mean_btd(p, 0, sc) * 0.4 / (2.0 * 3.0), 1e-14);
}

TEST(Report, CollectsEverything) {
  const auto p = LoadProfile::from_loads({0.5, 0.5}, {vec({1, 0}), vec({0.5, 0.5})}, {Vec::Ones(2), Vec::Ones(2)});
  const auto r = btd_report(p);
  ASSERT_EQ(r.slices.size(), 2u);
  EXPECT_DOUBLE_EQ(r.slices[1].btd[static_cast<int>(Scheme::gps)], mean_btd_gps(p, 1));
  EXPECT_DOUBLE_EQ(r.overall.ss, overall_gains(p).ss);
}
