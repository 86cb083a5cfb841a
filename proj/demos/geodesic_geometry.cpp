// Distance function of a conformal metric: eikonal residual, small-rho limits
// and the Laplacian comparison envelope against measured curvature.

#include <cstdio>

#include "conelab/geodesic.hpp"

using namespace conelab;

int main() {
  const GridPtr g = Grid::cube(48, 0.6);
  const MetricField m(g, ConformalMetric::sine(0.3));
  const GeodesicField gf = solve_eikonal(m, Vec3(0.1, 0.15, -0.1));

  double residual = 0.0;
  for (std::size_t p = 0; p < g->size(); ++p)
    if (gf.is_valid(p)) residual = std::max(residual, std::abs(gf.eikonal_residual[p]));
  const SmallRhoLimits lim = small_rho_limits(gf, m);
  const CurvatureReport cr = curvature(m, [&](std::size_t p) { return g->frame_distance(p) >= 2 && gf.is_valid(p); });
  const ComparisonReport cmp = comparison_check(gf, m, cr.a);

  std::printf("rho_max %.4f, max eikonal residual %.3e\n", gf.rho_max, residual);
  std::printf("div(rho A grad rho) -> %.4f, Hessian eigenvalues -> %.4f %.4f %.4f\n", lim.limit_div, lim.limit_hess[0],
              lim.limit_hess[1], lim.limit_hess[2]);
  std::printf("curvature bound a = %.4f, comparison: %zu nodes, %zu violations, worst margin %.3e\n", cr.a, cmp.checked,
              cmp.violations, cmp.worst_margin);
}
