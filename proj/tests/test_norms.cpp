#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "conelab/norms.hpp"
#include "oracles.hpp"

using namespace conelab;

namespace {

std::vector<Snapshot> sampled_run(const oracle::RandomSpaceTimeField& f, const GridPtr& g, int steps, double dt,
                                  double scale = 1.0) {
  std::vector<Snapshot> out;
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    out.push_back({t, ScalarField::sample(g, [&](const Vec3& x) { return scale * f.u(t, x); }), ScalarField(g)});
  }
  return out;
}

ConeSpec flat_cone(const GridPtr& g, const Vec3& x0, double t0, double delta = 0.0) {
  auto m = std::make_shared<MetricField>(g, ConstantMetric::identity());
  return {t0, delta, std::make_shared<const GeodesicField>(solve_eikonal(*m, x0))};
}

}  // namespace

TEST(StrichartzPair, KnownPairs) {
  EXPECT_TRUE(std::isinf(strichartz_pair(6.0)));
  EXPECT_DOUBLE_EQ(strichartz_pair(12.0), 4.0);
  EXPECT_DOUBLE_EQ(strichartz_pair(10.0), 5.0);
  EXPECT_THROW(strichartz_pair(5.999), PreconditionError);
  EXPECT_THROW(strichartz_pair(std::nan("")), PreconditionError);
}

TEST(StrichartzPair, ScalingRelation) {
  for (double q = 6.25; q < 60.0; q += 0.75) EXPECT_DOUBLE_EQ(strichartz_pair(q) * (q - 6.0), 2.0 * q) << q;
}

TEST(MixedNorm, ZeroFieldIsZero) {
  auto g = Grid::cube(8, 1.0);
  std::vector<Snapshot> run;
  for (int k = 0; k < 4; ++k) run.push_back({0.1 * k, ScalarField(g), ScalarField(g)});
  EXPECT_EQ(mixed_norm(run, MixedNormSpec::strichartz(12.0)), 0.0);
  EXPECT_EQ(mixed_norm(run, MixedNormSpec::strichartz(6.0)), 0.0);
}

TEST(MixedNorm, UnitOnUnitRegionGivesWindowPower) {
  // 8^3 nodes at h = 1/8 carry unit measure.
  auto g = Grid::cube(16, 1.0);
  auto region = [&](std::size_t p) {
    const auto c = g->coords(p);
    return c[0] >= 4 && c[0] < 12 && c[1] >= 4 && c[1] < 12 && c[2] >= 4 && c[2] < 12;
  };
  const ScalarField one(g, 1.0);
  const double T = 1.7;
  NormSeries s;
  for (int k = 0; k <= 17; ++k) {
    s.t.push_back(T * k / 17.0);
    s.slice.push_back(slice_integral(one, 12.0, region));
    s.nodes.push_back(512);
  }
  EXPECT_NEAR(mixed_norm(s, 4.0, 12.0), std::pow(T, 0.25), 1e-14);
  EXPECT_NEAR(mixed_norm(s, kInf, 12.0), 1.0, 1e-14);
}

TEST(MixedNorm, AbsolutelyHomogeneous) {
  auto g = Grid::cube(16, 1.0);
  const oracle::RandomSpaceTimeField f(11);
  const ConeSpec cone = flat_cone(g, Vec3(0.1, 0, 0), 0.8, 0.0);
  const auto base = sampled_run(f, g, 10, 0.05);
  for (double lambda : {-2.0, 0.37, 3.7}) {
    const auto scaled = sampled_run(f, g, 10, 0.05, lambda);
    for (const MixedNormSpec& spec : {MixedNormSpec::strichartz(6.0), MixedNormSpec::strichartz(12.0),
                                      MixedNormSpec::strichartz(10.0, NormRegion::cone, cone)}) {
      const double a = mixed_norm(base, spec), b = mixed_norm(scaled, spec);
      EXPECT_NEAR(b, std::abs(lambda) * a, 1e-12 * std::abs(lambda) * a) << lambda << " q=" << spec.q;
    }
  }
}

TEST(MixedNorm, ConeNormIsAtMostStripNorm) {
  auto g = Grid::cube(16, 1.0);
  const ConeSpec cone = flat_cone(g, Vec3(0.0, 0.1, 0), 0.6, 0.2);
  for (unsigned seed : {1u, 2u, 3u}) {
    const auto run = sampled_run(oracle::RandomSpaceTimeField(seed), g, 12, 0.05);
    for (double q : {6.0, 8.0, 12.0}) {
      const double strip = mixed_norm(run, MixedNormSpec::strichartz(q));
      const double inner = mixed_norm(run, MixedNormSpec::strichartz(q, NormRegion::cone, cone));
      const double expanded = mixed_norm(run, MixedNormSpec::strichartz(q, NormRegion::expanded, cone));
      EXPECT_LE(inner, expanded);
      EXPECT_LE(expanded, strip);
      EXPECT_GT(inner, 0.0);
    }
  }
}

TEST(MixedNorm, HoelderInterpolationHoldsOnTwentyRuns) {
  auto g = Grid::cube(12, 1.0);
  const ConeSpec cone = flat_cone(g, Vec3::Zero(), 0.7);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  for (unsigned seed = 100; seed < 120; ++seed) {
    const auto run = sampled_run(oracle::RandomSpaceTimeField(seed), g, 8, 0.06);
    const double q1 = 8.0 + 12.0 * pick(rng);
    const double q = 6.0 + (q1 - 6.0) * (0.05 + 0.9 * pick(rng));
    const NormRegion region = seed % 2 ? NormRegion::cone : NormRegion::strip;
    const double lhs = mixed_norm(run, MixedNormSpec::strichartz(q, region, cone));
    const double e = mixed_norm(run, MixedNormSpec::strichartz(6.0, region, cone));
    const double up = mixed_norm(run, MixedNormSpec::strichartz(q1, region, cone));
    EXPECT_LE(lhs, interpolation_bound(q, q1, e, up) * (1.0 + 1e-12)) << "seed " << seed;
  }
  EXPECT_THROW(interpolation_bound(12.0, 10.0, 1.0, 1.0), PreconditionError);
}

TEST(MixedNorm, EmptyRegionAndBadSpecs) {
  auto g = Grid::cube(8, 1.0);
  std::vector<Snapshot> run;
  for (int k = 0; k < 3; ++k) run.push_back({0.1 * (k + 1), ScalarField(g, 1.0), ScalarField(g)});
  const ConeSpec past = flat_cone(g, Vec3::Zero(), 0.0);
  EXPECT_THROW(mixed_norm(run, MixedNormSpec::strichartz(12.0, NormRegion::cone, past)), PreconditionError);
  EXPECT_THROW(mixed_norm(run, MixedNormSpec::strichartz(12.0, NormRegion::expanded, past)), PreconditionError);
  EXPECT_THROW(mixed_norm(run, MixedNormSpec::strichartz(12.0, NormRegion::cone, ConeSpec{})), PreconditionError);
  EXPECT_THROW(mixed_norm(std::vector<Snapshot>{run[0]}, MixedNormSpec::strichartz(12.0)), PreconditionError);
  EXPECT_THROW(mixed_norm(run, MixedNormSpec{1.0, 0.5, NormRegion::strip, {}}), PreconditionError);
}

namespace {

StrichartzRatio linear_ratio(int cells, double amp, double q, bool forced = false) {
  auto g = Grid::cube(cells, 1.0);
  auto m = std::make_shared<const MetricField>(g, std::make_shared<WavyMetric>());
  const InitialData d = bump_data(g, Vec3(0.05, 0, 0), 0.4, amp, 0.5 * amp, 4);
  ForcingFn forcing;
  if (forced) {
    const Bump b{Vec3(-0.1, 0.1, 0), 0.3, amp, 4};
    forcing = [g, b](double t) {
      return ScalarField::sample(g, [&](const Vec3& x) { return std::cos(3.0 * t) * b.value(x); });
    };
  }
  return strichartz_ratio(m, d, forcing, q, 0.5, cfl_dt(*m));
}

}  // namespace

TEST(StrichartzRatio, ZeroDataIsAnError) {
  auto g = Grid::cube(16, 1.0);
  auto m = std::make_shared<const MetricField>(g, ConstantMetric::identity());
  InitialData d{ScalarField(g), ScalarField(g), 0.0, nullptr, "zero"};
  EXPECT_THROW(strichartz_ratio(m, d, {}, 12.0, 0.2, cfl_dt(*m)), PreconditionError);
}

TEST(StrichartzRatio, InvariantUnderDataScaling) {
  for (double q : {6.0, 12.0})
    for (bool forced : {false, true}) {
      const double a = linear_ratio(24, 1.0, q, forced).ratio;
      const double b = linear_ratio(24, 2.5, q, forced).ratio;
      EXPECT_NEAR(b / a, 1.0, 1e-2) << q;
    }
}

TEST(StrichartzRatio, StableUnderRefinement) {
  for (double q : {6.0, 12.0}) {
    const double a = linear_ratio(32, 1.0, q).ratio;
    const double b = linear_ratio(64, 1.0, q).ratio;
    EXPECT_GT(a, 0.0);
    EXPECT_LT(std::max(a, b) / std::min(a, b), 2.0) << q << ": " << a << " vs " << b;
  }
}

TEST(Bootstrap, RampToConstantPasses) {
  std::vector<double> t, y;
  for (int k = 0; k <= 20; ++k) {
    t.push_back(0.05 * k);
    y.push_back(k == 0 ? 0.0 : 1.0);
  }
  const BootstrapVerdict v = bootstrap_check(t, y, 1.0, 2.0, 0.2);
  EXPECT_TRUE(v.pass());
  EXPECT_LT(v.max_y, 2.0);
  EXPECT_GT(v.lower_root, 1.0);
  EXPECT_LT(v.lower_root, 2.0);
  EXPECT_GT(v.upper_root, 2.0);
  EXPECT_NEAR(1.0 + 0.2 * v.lower_root * v.lower_root, v.lower_root, 1e-13);
  EXPECT_NEAR(1.0 + 0.2 * v.upper_root * v.upper_root, v.upper_root, 1e-12);
}

TEST(Bootstrap, ThresholdIsRejectedWithItsOwnError) {
  const std::vector<double> t{0.0, 1.0}, y{0.0, 1.0};
  EXPECT_THROW(bootstrap_check(t, y, 1.0, 2.0, 0.25), BootstrapThresholdError);
  EXPECT_THROW(bootstrap_check(t, y, 1.0, 2.0, 0.3), BootstrapThresholdError);
  EXPECT_NO_THROW(bootstrap_check(t, y, 1.0, 2.0, std::nextafter(0.25, 0.0)));
  try {
    bootstrap_check(t, {0.5, 1.0}, 1.0, 2.0, 0.2);
    FAIL() << "nonzero start accepted";
  } catch (const BootstrapThresholdError&) {
    FAIL() << "nonzero start reported as a threshold error";
  } catch (const PreconditionError&) {
  }
  EXPECT_THROW(bootstrap_check(t, y, 1.0, 1.0, 0.1), PreconditionError);
  EXPECT_THROW(bootstrap_check({0.0, 0.0}, y, 1.0, 2.0, 0.1), PreconditionError);
}

TEST(Bootstrap, SampleInsideGapViolatesHypothesis) {
  // C0 = 1, gamma = 2, eps = 0.2: gap (1.382, 3.618).
  const BootstrapVerdict v = bootstrap_check({0, 1, 2}, {0.0, 1.0, 2.5}, 1.0, 2.0, 0.2);
  EXPECT_EQ(v.outcome, BootstrapOutcome::hypothesis_fails);
  EXPECT_EQ(v.witness, 2u);
}

TEST(Bootstrap, JumpAcrossGapViolatesContinuity) {
  // Every sample satisfies the inequality, but the interpolant passes through the gap.
  const BootstrapVerdict v = bootstrap_check({0, 1, 2, 3}, {0.0, 1.0, 4.0, 1.0}, 1.0, 2.0, 0.2);
  EXPECT_EQ(v.outcome, BootstrapOutcome::hypothesis_fails);
  EXPECT_EQ(v.witness, 1u);
}

TEST(Bootstrap, RandomHypothesesAllPass) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int accepted = 0, rejected = 0, attempts = 0;
  while (accepted < 1000 && attempts < 200000) {
    ++attempts;
    const double c0 = std::exp(std::log(0.1) + u01(rng) * std::log(100.0));
    const double gamma = 1.05 + 5.0 * u01(rng);
    const double eps = u01(rng) * bootstrap_threshold(c0, gamma) * (1.0 - 1e-9);
    const double y1 = bootstrap_check({0.0}, {0.0}, c0, gamma, eps).lower_root;
    const double ceiling = 3.0 * std::max(2.0 * c0, std::min(bootstrap_check({0.0}, {0.0}, c0, gamma, eps).upper_root, 50.0 * c0));
    const int n = 2 + static_cast<int>(40 * u01(rng));
    std::vector<double> t{0.0}, y{0.0};
    for (int k = 1; k < n; ++k) {
      t.push_back(t.back() + 0.01 + u01(rng));
      y.push_back(u01(rng) < 0.97 ? y1 * u01(rng) : ceiling * u01(rng));
    }
    if (u01(rng) < 0.2) y.back() = y1;  // touch the lower root exactly
    const BootstrapVerdict v = bootstrap_check(t, y, c0, gamma, eps);
    if (v.outcome == BootstrapOutcome::hypothesis_fails) {
      ++rejected;
      continue;
    }
    ++accepted;
    ASSERT_TRUE(v.pass()) << "counterexample: C0=" << c0 << " gamma=" << gamma << " eps=" << eps
                          << " witness=" << v.witness;
  }
  EXPECT_EQ(accepted, 1000);
  EXPECT_GT(rejected, 0);
}
