#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tneg/estimators.h"
#include "tneg/oracle.h"

namespace tneg {
namespace {

ChainConfig chain(long sweeps, std::uint64_t seed, UpdateRule rule = UpdateRule::MetropolisSingleSpin) {
  ChainConfig cfg = ChainConfig::defaults(rule);
  cfg.n_measurement_sweeps = static_cast<int>(sweeps);
  cfg.seed = seed;
  return cfg;
}

TEST(Observables, BoundedForExtremeArguments) {
  for (double e : {-1e300, -50.0, -1.0, 0.0, 1.0, 50.0, 1e300}) {
    const double n = negativity_observable(3.0, e);
    const double f = fidelity_observable(3.0, e);
    EXPECT_TRUE(std::isfinite(n));
    EXPECT_GE(n, 0.0);
    EXPECT_LE(n, 0.5);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  EXPECT_EQ(negativity_observable(0.0, -7.0), 0.0);
}

TEST(Observables, FlipOfComplementPreservesNegativitySample) {
  const Lattice lat(LatticeSpec{{4, 4}, Boundary::Periodic});
  const auto part = half_cylinder(lat);
  std::vector<std::uint8_t> comp(16);
  for (int i = 0; i < 16; ++i) comp[i] = part.in_a(i) ? 0 : 1;
  std::mt19937_64 g(1);
  for (int t = 0; t < 200; ++t) {
    const auto s = SpinConfig::from_bits(g(), 16);
    const auto q = flip_region(s, comp);
    EXPECT_EQ(negativity_observable(0.7, boundary_energy(lat, part, s)),
              negativity_observable(0.7, boundary_energy(lat, part, q)));
  }
}

TEST(Estimators, TwoSiteChainClosedForms) {
  const Lattice lat(LatticeSpec{{2}, Boundary::Open});
  const auto part = single_site(lat, 0);
  const auto est = estimate_boundary_observables(lat, part, 1.0, chain(200000, 5));
  const double t = std::tanh(1.0);
  EXPECT_NEAR(est.negativity.value, 0.5 * t, 1e-15);  // |H_boundary| is constant
  EXPECT_NEAR(est.fidelity.value, 0.5 * (1 + t * t), 3.0 * est.fidelity.std_error);
  EXPECT_GT(est.fidelity.std_error, 0.0);
}

TEST(Estimators, AgreeWithOracleOnSmallTorus) {
  const Lattice lat(LatticeSpec{{3, 3}, Boundary::Periodic});
  const auto part = half_cylinder(lat);
  for (double beta : {0.3, 0.7}) {
    const auto est = estimate_boundary_observables(lat, part, beta, chain(100000, 11));
    EXPECT_NEAR(est.negativity.value, oracle::exact_negativity(lat, part, beta), 4.0 * est.negativity.std_error);
    EXPECT_NEAR(est.fidelity.value, oracle::exact_fidelity(lat, part, beta), 4.0 * est.fidelity.std_error);
    EXPECT_LE(est.negativity.value, 0.5);
    EXPECT_EQ(est.negativity.partition_id, "half-cylinder");
    EXPECT_GT(est.negativity.n_effective, 1000.0);
  }
}

TEST(Estimators, ExplicitQAgreesWithDirectP) {
  const Lattice lat(LatticeSpec{{3, 3}, Boundary::Periodic});
  const auto part = block_region(lat, 2);
  EstimatorOptions q;
  q.mode = SamplingMode::ExplicitQ;
  const auto a = estimate_negativity(lat, part, 0.5, chain(100000, 21));
  const auto b = estimate_negativity(lat, part, 0.5, chain(100000, 21), q);
  // Same seed and the flip does not change the sample: identical results.
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(b.sampling_mode, SamplingMode::ExplicitQ);
  EXPECT_NEAR(b.value, oracle::exact_negativity(lat, part, 0.5), 4.0 * b.std_error);
}

TEST(Estimators, TranslationAverageSingleSite) {
  const Lattice lat(LatticeSpec{{3, 4}, Boundary::Periodic});
  const auto part = single_site(lat);
  EstimatorOptions opts;
  opts.translation_average = true;
  const auto est = estimate_negativity(lat, part, 0.5, chain(40000, 4, UpdateRule::WolffCluster), opts);
  EXPECT_NEAR(est.value, oracle::exact_negativity(lat, part, 0.5), 4.0 * est.std_error);
  opts.mode = SamplingMode::ExplicitQ;
  EXPECT_THROW(estimate_negativity(lat, part, 0.5, chain(100, 4), opts), std::invalid_argument);

  const Lattice open(LatticeSpec{{3, 3}, Boundary::Open});
  EXPECT_THROW(BoundaryEnergyEvaluator(open, single_site(open), true), std::invalid_argument);
}

TEST(Estimators, InfiniteTemperatureIsExactlyZero) {
  const Lattice lat(LatticeSpec{{4, 4}, Boundary::Periodic});
  const auto est = estimate_boundary_observables(lat, half_cylinder(lat), 0.0, chain(500, 1));
  EXPECT_EQ(est.negativity.value, 0.0);
  EXPECT_EQ(est.fidelity.value, 0.5);
}

TEST(Sweeps, WorkerCountDoesNotChangeResults) {
  const Lattice lat(LatticeSpec{{6, 6}, Boundary::Periodic});
  const auto part = half_cylinder(lat);
  const std::vector<double> temps{1.5, 2.5, 3.5, 4.5};
  const auto a = negativity_temperature_sweep(lat, part, temps, chain(2000, 7), {}, 1);
  const auto b = negativity_temperature_sweep(lat, part, temps, chain(2000, 7), {}, 3);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value, b[i].value);
    EXPECT_EQ(a[i].std_error, b[i].std_error);
    EXPECT_DOUBLE_EQ(a[i].beta, 1.0 / temps[i]);
  }
  const auto f = fidelity_temperature_sweep(lat, part, temps, chain(2000, 7), 2);
  EXPECT_EQ(f.size(), temps.size());
}

TEST(Sweeps, RejectBadGrids) {
  const Lattice lat(LatticeSpec{{4, 4}, Boundary::Periodic});
  const auto part = half_cylinder(lat);
  const std::vector<double> unsorted{2.0, 1.0};
  const std::vector<double> zero{0.0, 1.0};
  EXPECT_THROW(negativity_temperature_sweep(lat, part, unsorted, chain(100, 1)), std::invalid_argument);
  EXPECT_THROW(negativity_temperature_sweep(lat, part, zero, chain(100, 1)), std::invalid_argument);
  EXPECT_THROW(negativity_temperature_sweep(lat, part, std::vector<double>{}, chain(100, 1)), std::invalid_argument);
}

TEST(Sweeps, PointSeedsAreDistinct) {
  const Lattice a(LatticeSpec{{8, 8}, Boundary::Periodic});
  const Lattice b(LatticeSpec{{16, 16}, Boundary::Periodic});
  const auto s = sweep_point_seed(1, "negativity", a, "half-cylinder", 2.0);
  EXPECT_EQ(s, sweep_point_seed(1, "negativity", a, "half-cylinder", 2.0));
  EXPECT_NE(s, sweep_point_seed(1, "negativity", b, "half-cylinder", 2.0));
  EXPECT_NE(s, sweep_point_seed(1, "negativity", a, "half-cylinder", 2.5));
  EXPECT_NE(s, sweep_point_seed(1, "fidelity", a, "half-cylinder", 2.0));
  EXPECT_NE(s, sweep_point_seed(1, "negativity", a, "half-cylinder", 2.0, 1));
}

TEST(Derivative, MatchesExactFiniteDifference) {
  const Lattice lat(LatticeSpec{{3, 3}, Boundary::Periodic});
  const auto part = single_site(lat);
  const double h = 0.2;
  const std::vector<double> temps{1.5, 3.0};
  DerivativeOptions opts;
  opts.h = h;
  opts.richardson = true;
  const auto pts = dN_dT_single_site(lat, temps, chain(100000, 2, UpdateRule::WolffCluster), opts);
  for (size_t i = 0; i < temps.size(); ++i) {
    const double exact = (oracle::exact_negativity(lat, part, 1.0 / (temps[i] + h)) -
                          oracle::exact_negativity(lat, part, 1.0 / (temps[i] - h))) /
                         (2 * h);
    EXPECT_NEAR(pts[i].derivative, exact, 4.0 * pts[i].std_error) << "T=" << temps[i];
    EXPECT_TRUE(std::isfinite(pts[i].richardson));
  }
  opts.richardson = false;
  const auto plain = dN_dT_single_site(lat, temps, chain(1000, 2, UpdateRule::WolffCluster), opts);
  EXPECT_TRUE(std::isnan(plain[0].richardson));
  opts.h = 2.0;
  EXPECT_THROW(dN_dT_single_site(lat, temps, chain(100, 2), opts), std::invalid_argument);
}

}  // namespace
}  // namespace tneg
