#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "conelab/geodesic.hpp"
#include "oracles.hpp"

using namespace conelab;

namespace {

GridPtr box(int cells, double half) { return Grid::cube(cells, half); }

/// Distance on the round unit sphere in stereographic coordinates.
double sphere_distance(const Vec3& x, const Vec3& y) {
  const double s = (x - y).norm() / std::sqrt((1 + x.squaredNorm()) * (1 + y.squaredNorm()));
  return 2.0 * std::asin(s);
}

double max_error_valid(const GeodesicField& gf, const std::function<double(const Vec3&)>& exact) {
  double e = 0.0;
  for (std::size_t p = 0; p < gf.grid().size(); ++p)
    if (gf.is_valid(p)) e = std::max(e, std::abs(gf.rho[p] - exact(gf.grid().position(p))));
  return e;
}

}  // namespace

TEST(Eikonal, FlatDistanceWithinTwoH) {
  auto g = box(32, 1.0);
  MetricField m(g, ConstantMetric::identity());
  const Vec3 x0(0.03, -0.1, 0.07);
  auto gf = solve_eikonal(m, x0);
  EXPECT_LE(max_error_valid(gf, [&](const Vec3& x) { return (x - x0).norm(); }), 2 * g->h(0));
  EXPECT_LE(gf.rho[g->nearest(x0)], g->h(0));
}

TEST(Eikonal, ScaledMetricDividesDistance) {
  auto g = box(32, 1.0);
  const double c = 1.6;
  MetricField m(g, ConstantMetric::scaled(c));
  const Vec3 x0(0.1, 0.0, -0.05);
  auto gf = solve_eikonal(m, x0);
  EXPECT_LE(max_error_valid(gf, [&](const Vec3& x) { return (x - x0).norm() / c; }), 2 * g->h(0));
}

TEST(Eikonal, UnfactoredFirstOrderConverges) {
  std::vector<double> errs;
  for (int cells : {16, 32}) {
    auto g = box(cells, 1.0);
    MetricField m(g, ConstantMetric::identity());
    EikonalOptions opt;
    opt.factored = false;
    opt.high_order = false;
    auto gf = solve_eikonal(m, Vec3::Zero(), opt);
    errs.push_back(max_error_valid(gf, [](const Vec3& x) { return x.norm(); }));
    EXPECT_LE(errs.back(), 2 * g->h(0));
  }
  EXPECT_LT(errs[1], errs[0]);
}

TEST(Eikonal, RoundSphereDistanceConverges) {
  std::vector<double> errs;
  const Vec3 x0(0.1, -0.05, 0.02);
  for (int cells : {16, 32, 64}) {
    auto g = box(cells, 1.0);
    MetricField m(g, ConformalMetric::sphere(1.0));
    auto gf = solve_eikonal(m, x0);
    errs.push_back(max_error_valid(gf, [&](const Vec3& x) { return sphere_distance(x, x0); }));
  }
  EXPECT_LE(errs[2], 1e-4);
  EXPECT_LT(errs[2], errs[1] / 4);
}

TEST(Eikonal, WavyMetricMatchesDijkstraWithinThreePercent) {
  auto g = box(32, 1.0);
  auto model = std::make_shared<WavyMetric>();
  MetricField m(g, model);
  const Vec3 x0 = g->position(16, 16, 16);
  auto gf = solve_eikonal(m, x0);
  oracle::LatticeDijkstra dj{{33, 33, 33}, g->origin(), g->h(0), 3};
  auto d = dj.run([&](const Vec3& x) { return model->A(x); }, {16, 16, 16});
  oracle::LatticeDijkstra dj26{{33, 33, 33}, g->origin(), g->h(0), 1};
  auto d26 = dj26.run([&](const Vec3& x) { return model->A(x); }, {16, 16, 16});
  double worst = 0.0;
  for (std::size_t p = 0; p < g->size(); ++p) {
    if (!gf.is_valid(p)) continue;
    worst = std::max(worst, std::abs(gf.rho[p] - d[p]) / d[p]);
    // the graph only overestimates
    EXPECT_LE(gf.rho[p], d26[p] + 2 * g->h(0));
    EXPECT_LE(gf.rho[p], d[p] + 2 * g->h(0));
  }
  EXPECT_LE(worst, 0.03);
}

TEST(Eikonal, ResidualWithinToleranceAndShrinks) {
  std::vector<double> maxres;
  for (int cells : {32, 64}) {
    auto g = box(cells, 1.0);
    MetricField m(g, std::make_shared<WavyMetric>());
    auto gf = solve_eikonal(m, Vec3(0.05, 0.1, -0.1));
    std::size_t valid = 0, within = 0;
    double mx = 0.0;
    for (std::size_t p = 0; p < g->size(); ++p) {
      if (!(gf.rho[p] > 0 && gf.rho[p] < gf.rho_max)) continue;
      ++valid;
      within += std::abs(gf.eikonal_residual[p]) <= gf.tol_eik;
      if (gf.rho[p] >= 2 * g->h(0)) mx = std::max(mx, std::abs(gf.eikonal_residual[p]));
    }
    EXPECT_GE(static_cast<double>(within), 0.99 * valid);
    maxres.push_back(mx);
  }
  EXPECT_LT(maxres[1], maxres[0]);
}

TEST(Eikonal, SweepUpdatesContract) {
  auto g = box(32, 1.0);
  MetricField m(g, ConformalMetric::sine(0.3, 0.6, 0.95));
  EikonalOptions opt;
  opt.high_order = false;
  auto res = solve_eikonal_rho(m, Vec3(0.2, 0.1, 0.0), opt);
  ASSERT_TRUE(res.converged);
  const auto& hist = res.update_history;
  ASSERT_GE(hist.size(), 3u);
  // after the first pass the per-iteration update never grows
  for (std::size_t i = 2; i < hist.size(); ++i) EXPECT_LE(hist[i], hist[i - 1] * (1 + 1e-9) + 1e-15);
}

TEST(Eikonal, ErrorsAreReported) {
  auto g = box(8, 1.0);
  MetricField m(g, std::make_shared<WavyMetric>());
  EXPECT_THROW(solve_eikonal(m, Vec3(2, 0, 0)), PreconditionError);
  EikonalOptions opt;
  opt.max_iterations = 1;
  EXPECT_THROW(solve_eikonal(m, Vec3(0.1, 0.2, 0.3), opt), NumericalError);
}

TEST(Eikonal, ObstacleAvoidingDistanceGoesAround) {
  auto obs = std::make_shared<SphereObstacle>(Vec3(0.3, 0, 0), 0.2);
  auto g = Grid::cube(40, 1.0, obs);
  MetricField m(g, ConstantMetric::identity());
  EikonalOptions avoid;
  avoid.avoid_obstacle = true;
  auto blind = solve_eikonal(m, Vec3::Zero());
  auto around = solve_eikonal(m, Vec3::Zero(), avoid);
  for (std::size_t p = 0; p < g->size(); ++p) {
    if (g->masked(p)) {
      EXPECT_TRUE(std::isnan(around.rho[p]));
      continue;
    }
    EXPECT_GE(around.rho[p], blind.rho[p] - 2 * g->h(0));
  }
  // directly behind the obstacle the detour is longer than the straight line
  const std::size_t behind = g->nearest(Vec3(0.6, 0, 0));
  EXPECT_GT(around.rho[behind], blind.rho[behind] + 0.02);
  // tangent, arc, tangent: 2 sqrt(d^2 - r^2) + r (pi - 2 acos(r / d)) with d = 0.3, r = 0.2
  const double detour = 2 * std::sqrt(0.05) + 0.2 * (M_PI - 2 * std::acos(0.2 / 0.3));
  EXPECT_NEAR(around.rho[behind], detour, 0.04);
}

TEST(GeodesicFields, FlatHessianAndLaplacian) {
  auto g = box(32, 1.0);
  MetricField m(g, ConstantMetric::identity());
  auto gf = solve_eikonal(m, Vec3(0.05, 0.0, -0.02));
  for (std::size_t p = 0; p < g->size(); ++p) {
    if (!gf.is_valid(p)) continue;
    const Mat3& hs = gf.hess_half_rho2[p];
    EXPECT_LE((hs - hs.transpose()).norm(), 1e-12);
    EXPECT_NEAR(hs.trace(), gf.lap_half_rho2[p], 1e-9);
    if (gf.rho[p] >= 2 * g->h(0) && gf.rho[p] <= 10 * g->h(0)) {
      EXPECT_NEAR(gf.lap_half_rho2[p], 3.0, 0.15);
      const Vec3 ev = generalized_eigenvalues(hs, m.g()[p]);
      EXPECT_NEAR(ev[0], 1.0, 0.05);
      EXPECT_NEAR(ev[2], 1.0, 0.05);
    }
  }
}

TEST(GeodesicFields, TraceMinusLaplacianIsChristoffelTerm) {
  // a^{ij} d_i d_j psi - lap_g psi = a^{ij} Gamma^k_ij psi_k, checked to O(h)
  std::vector<double> errs;
  for (int cells : {32, 64}) {
    auto g = box(cells, 1.0);
    MetricField m(g, std::make_shared<WavyMetric>());
    auto gf = solve_eikonal(m, Vec3(0.1, 0.0, 0.05));
    auto psi = map_nodes<double>(g, [&](std::size_t p) { return 0.5 * gf.rho[p] * gf.rho[p]; });
    auto hess = hessian_fd(psi, MaskPolicy::ignore);
    auto grad = gradient_fd(psi, MaskPolicy::ignore);
    double e = 0.0;
    for (std::size_t p = 0; p < g->size(); ++p) {
      if (!gf.is_valid(p) || gf.rho[p] < 2 * g->h(0)) continue;
      const Mat3& a = m.A()[p];
      const auto gam = christoffel_at(m, p);
      double corr = 0.0;
      for (int k = 0; k < 3; ++k) corr += (a.cwiseProduct(gam[k])).sum() * grad[p][k];
      const double lhs = (a.cwiseProduct(hess[p])).sum() - gf.lap_half_rho2[p];
      e = std::max(e, std::abs(lhs - corr));
      // the covariant Hessian traces to the Laplacian
      EXPECT_NEAR((a * gf.hess_half_rho2[p]).trace(), gf.lap_half_rho2[p], 0.2);
    }
    errs.push_back(e);
  }
  EXPECT_LT(errs[1], errs[0]);
}

TEST(Comparison, RejectsLargeCurvatureRadius) {
  auto g = box(16, 1.0);
  MetricField m(g, ConstantMetric::identity());
  auto gf = solve_eikonal(m, Vec3::Zero());
  EXPECT_THROW(comparison_check(gf, m, 4.0), PreconditionError);
  auto rep = comparison_check(gf, m, 0.0);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_GT(rep.checked, 0u);
}

TEST(Comparison, SphereSitsOnTheLowerEnvelope) {
  auto g = box(32, 0.8);
  MetricField m(g, ConformalMetric::sphere(1.0));
  auto gf = solve_eikonal(m, Vec3(0.05, 0.0, 0.0));
  auto rep = comparison_check(gf, m, 1.0);
  EXPECT_EQ(rep.violations, 0u);
  for (const auto& row : rep.rows) EXPECT_NEAR(row.lap, row.lower, 4 * rep.band);
}

TEST(Comparison, ConformalMetricNoViolationsAtH64) {
  auto g = box(64, 0.5);
  MetricField m(g, ConformalMetric::sine(0.3));
  const Vec3 x0(0.1, 0.15, -0.1);
  auto gf = solve_eikonal(m, x0);
  auto cr = curvature(m, [&](std::size_t p) { return g->frame_distance(p) >= 2 && gf.is_valid(p); });
  auto rep = comparison_check(gf, m, cr.a);
  EXPECT_EQ(rep.violations, 0u) << "worst margin " << rep.worst_margin;
}

TEST(SmallRho, FlatAndScaledLimitIsThree) {
  auto g = box(64, 1.0);
  for (double c : {1.0, 1.7}) {
    MetricField m(g, ConstantMetric::scaled(c));
    auto gf = solve_eikonal(m, Vec3(0.02, 0.01, 0.0));
    auto lim = small_rho_limits(gf, m);
    EXPECT_NEAR(lim.limit_div, 3.0, 0.05);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(lim.limit_hess[i], 1.0, 0.05);
  }
}

TEST(SmallRho, ConformalLimitIsIdentity) {
  auto g = box(64, 1.0);
  MetricField m(g, ConformalMetric::sine(0.3, 0.7, 0.95));
  auto gf = solve_eikonal(m, Vec3(0.3, 0.25, -0.2));
  auto lim = small_rho_limits(gf, m);
  EXPECT_NEAR(lim.limit_div, 3.0, 0.05);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(lim.limit_hess[i], 1.0, 0.05);
}

TEST(SmallRho, EmptyShellIsAnError) {
  auto g = box(4, 1.0);
  MetricField m(g, ConstantMetric::identity());
  auto gf = solve_eikonal(m, Vec3::Zero());
  EXPECT_THROW(small_rho_limits(gf, m), PreconditionError);
}

TEST(PolarIntegrals, FlatClosedFormAndExponent) {
  auto g = box(64, 1.25);
  MetricField m(g, ConstantMetric::identity());
  auto gf = solve_eikonal(m, Vec3::Zero());
  std::vector<double> s{0.1, 0.2, 0.4}, i1;
  const double closed = 8 * std::numbers::pi / 3;
  for (double S : s) {
    auto pi = polar_integral_estimates(gf, S);
    EXPECT_NEAR(pi.I1 / std::pow(S, 1.5), closed, 0.1 * closed);
    EXPECT_NEAR(pi.I2 / pi.I1, std::sqrt(2.0), 0.02);
    i1.push_back(pi.I1);
  }
  EXPECT_NEAR(fitted_exponent(s, i1), 1.5, 0.1);
  EXPECT_THROW(polar_integral_estimates(gf, 0.9), PreconditionError);
}

TEST(PolarIntegrals, WavyExponent) {
  auto g = box(64, 1.25);
  MetricField m(g, std::make_shared<WavyMetric>());
  auto gf = solve_eikonal(m, Vec3(0.05, 0, 0));
  std::vector<double> s{0.1, 0.2, 0.4}, i1, i2;
  for (double S : s) {
    auto pi = polar_integral_estimates(gf, S);
    i1.push_back(pi.I1);
    i2.push_back(pi.I2);
  }
  EXPECT_NEAR(fitted_exponent(s, i1), 1.5, 0.15);
  EXPECT_NEAR(fitted_exponent(s, i2), 1.5, 0.15);
}
