#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "conelab/curvature.hpp"
#include "conelab/eikonal.hpp"
#include "conelab/reduce.hpp"

namespace conelab {

/// Distance function rho(., x0) of g and the fields derived from it.
struct GeodesicField {
  Vec3 x0;
  ScalarField rho;
  VectorField grad_rho;       // Euclidean gradient, from d(rho^2) / (2 rho)
  VectorField gradg_rho;      // A grad rho
  ScalarField lap_half_rho2;  // Laplace-Beltrami of rho^2 / 2, G-weighted flux form
  MatrixField hess_half_rho2; // covariant Hessian of rho^2 / 2
  ScalarField div_rho_gradg;  // d_i (rho a^{ij} rho_j)
  ScalarField eikonal_residual;
  std::vector<std::uint8_t> valid;
  double rho_max = 0.0;
  double tol_eik = 0.0;
  EikonalResult solver;
  bool avoid_obstacle = false;

  const Grid& grid() const { return rho.grid(); }
  bool is_valid(std::size_t p) const { return valid[p] != 0; }
};

/// Solves the eikonal equation from x0 and assembles every derived field.
///
/// Second-order quantities differentiate psi = rho^2 / 2, which is smooth at x0.
/// A node is valid when rho < rho_max (0.4 times the distance from x0 to the
/// outer box) and |a^{ij} rho_i rho_j - 1| <= 10 h.
inline GeodesicField solve_eikonal(const MetricField& m, const Vec3& x0, const EikonalOptions& opt = {}) {
  const Grid& g = m.grid();
  GeodesicField gf;
  gf.x0 = x0;
  gf.avoid_obstacle = opt.avoid_obstacle;
  gf.solver = solve_eikonal_rho(m, x0, opt);
  if (!gf.solver.converged)
    throw NumericalError("eikonal sweeping did not converge; last update " +
                         std::to_string(gf.solver.update_history.back()));
  gf.rho = gf.solver.rho;
  const MaskPolicy policy = opt.avoid_obstacle ? MaskPolicy::respect : MaskPolicy::ignore;
  const GridPtr& gp = m.grid_ptr();

  auto psi = map_nodes<double>(gp, [&](std::size_t p) { return 0.5 * gf.rho[p] * gf.rho[p]; });
  if (opt.avoid_obstacle)
    for (std::size_t p = 0; p < g.size(); ++p)
      if (g.masked(p)) psi[p] = 0.0;
  const VectorField grad_psi = gradient_fd(psi, policy);
  gf.grad_rho = map_nodes<Vec3>(gp, [&](std::size_t p) {
    return gf.rho[p] > 0.0 ? Vec3(grad_psi[p] / gf.rho[p]) : Vec3::Zero();
  });
  gf.gradg_rho = map_nodes<Vec3>(gp, [&](std::size_t p) { return Vec3(m.A()[p] * gf.grad_rho[p]); });

  const VectorField flux = map_nodes<Vec3>(gp, [&](std::size_t p) { return Vec3(m.A()[p] * grad_psi[p]); });
  gf.div_rho_gradg = divergence_fd(flux, policy);
  const VectorField weighted =
      map_nodes<Vec3>(gp, [&](std::size_t p) { return Vec3(std::sqrt(m.G()[p]) * flux[p]); });
  const ScalarField div_weighted = divergence_fd(weighted, policy);
  gf.lap_half_rho2 = map_nodes<double>(gp, [&](std::size_t p) { return div_weighted[p] / std::sqrt(m.G()[p]); });

  const MatrixField hess = hessian_fd(psi, policy);
  gf.hess_half_rho2 = map_nodes<Mat3>(gp, [&](std::size_t p) {
    if (m.constant()) return Mat3(hess[p]);
    const Christoffel gam = christoffel_at(m, p);
    Mat3 h = hess[p];
    for (int k = 0; k < 3; ++k) h -= grad_psi[p][k] * gam[k];
    return Mat3(0.5 * (h + h.transpose()));
  });

  double frame_min = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.size(); ++p)
    if (g.frame_distance(p) == 0 && std::isfinite(gf.rho[p])) frame_min = std::min(frame_min, gf.rho[p]);
  gf.rho_max = 0.4 * frame_min;
  gf.tol_eik = 10.0 * g.h_min();
  gf.eikonal_residual = map_nodes<double>(
      gp, [&](std::size_t p) { return gf.grad_rho[p].dot(m.A()[p] * gf.grad_rho[p]) - 1.0; });
  gf.valid.assign(g.size(), 0);
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (opt.avoid_obstacle && g.masked(p)) continue;
    const double r = gf.rho[p];
    gf.valid[p] = std::isfinite(r) && r > 0.0 && r < gf.rho_max && std::abs(gf.eikonal_residual[p]) <= gf.tol_eik;
  }
  return gf;
}

/// Symmetric-definite generalized eigenvalues of (h, gm), ascending.
inline Vec3 generalized_eigenvalues(const Mat3& h, const Mat3& gm) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat3> es(h, gm, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

struct ComparisonRow {
  std::size_t node;
  double rho;
  double lower, lap, upper;
  Vec3 hess_eigs;
  double margin;  // smallest signed distance inside the bounds (negative = outside)
};

struct ComparisonReport {
  double a = 0.0;
  double band = 0.0;
  std::size_t checked = 0;
  std::size_t violations = 0;  // outside the bounds by more than the band
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<ComparisonRow> rows;
};

/// a rho cot(a rho) and a rho coth(a rho), with their a -> 0 limits.
inline double rho_cot(double a, double r) {
  const double x = a * r;
  return x < 1e-8 ? 1.0 - x * x / 3.0 : x / std::tan(x);
}
inline double rho_coth(double a, double r) {
  const double x = a * r;
  return x < 1e-8 ? 1.0 + x * x / 3.0 : x / std::tanh(x);
}

/// Checks 1 + 2 a rho cot(a rho) <= lap <= 1 + 2 a rho coth(a rho) and the
/// generalized eigenvalues of the Hessian of rho^2/2 against g lying in
/// [a rho cot, a rho coth], on valid nodes with rho >= 2h, up to band = C h.
inline ComparisonReport comparison_check(const GeodesicField& gf, const MetricField& m, double a,
                                         double band_constant = 2.0) {
  const Grid& g = gf.grid();
  if (!(a * gf.rho_max < std::numbers::pi / 2))
    throw PreconditionError("comparison check needs a * rho_max < pi/2");
  ComparisonReport rep;
  rep.a = a;
  rep.band = band_constant * g.h_min();
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!gf.is_valid(p) || gf.rho[p] < 2.0 * g.h_min()) continue;
    const double r = gf.rho[p];
    const double lo = rho_cot(a, r), hi = rho_coth(a, r);
    ComparisonRow row{p, r, 1.0 + 2.0 * lo, gf.lap_half_rho2[p], 1.0 + 2.0 * hi,
                      generalized_eigenvalues(gf.hess_half_rho2[p], m.g()[p]), 0.0};
    double margin = std::min(row.lap - row.lower, row.upper - row.lap);
    margin = std::min({margin, row.hess_eigs[0] - lo, hi - row.hess_eigs[2]});
    row.margin = margin;
    ++rep.checked;
    if (margin < -rep.band) ++rep.violations;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    rep.rows.push_back(row);
  }
  return rep;
}

struct SmallRhoLimits {
  double limit_div = 0.0;
  Vec3 limit_hess = Vec3::Zero();  // ascending generalized eigenvalues against g
  std::size_t samples = 0;
};

/// Shell means of div(rho A grad rho) and of the generalized eigenvalues of the
/// Hessian of rho^2/2 over 2h <= rho <= 10h, extrapolated to rho -> 0 by a
/// least-squares line in rho^2.
inline SmallRhoLimits small_rho_limits(const GeodesicField& gf, const MetricField& m) {
  const Grid& g = gf.grid();
  const double h = g.h_min();
  const int bins = 8;
  const double r0 = 2.0 * h, r1 = 10.0 * h;
  std::vector<double> cnt(bins, 0.0), sr2(bins, 0.0), sdiv(bins, 0.0);
  std::vector<Vec3> seig(bins, Vec3::Zero());
  SmallRhoLimits out;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double r = gf.rho[p];
    if (!gf.is_valid(p) || r < r0 || r > r1) continue;
    const int b = std::min(bins - 1, static_cast<int>((r - r0) / (r1 - r0) * bins));
    cnt[b] += 1.0;
    sr2[b] += r * r;
    sdiv[b] += gf.div_rho_gradg[p];
    seig[b] += generalized_eigenvalues(gf.hess_half_rho2[p], m.g()[p]);
    ++out.samples;
  }
  std::vector<double> xs, ydiv;
  std::vector<Vec3> yeig;
  for (int b = 0; b < bins; ++b) {
    if (cnt[b] == 0.0) continue;
    xs.push_back(sr2[b] / cnt[b]);
    ydiv.push_back(sdiv[b] / cnt[b]);
    yeig.push_back(seig[b] / cnt[b]);
  }
  if (xs.size() < 2) throw PreconditionError("small-rho shell is empty");
  auto intercept = [&](const std::vector<double>& y) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += y[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return (sy - slope * sx) / n;
  };
  out.limit_div = intercept(ydiv);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> y;
    for (const auto& v : yeig) y.push_back(v[c]);
    out.limit_hess[c] = intercept(y);
  }
  return out;
}

struct PolarIntegrals {
  double S = 0.0;
  double I1 = 0.0;  // integral over D(S) of rho^{-3/2} dx
  double I2 = 0.0;  // integral over the mantle of |t|^{-3/2} d sigma
};

/// Both polar integrals by shell quadrature. With V(r) the (weighted) volume of
/// {rho < r}, the integral of rho^{-3/2} is S^{-3/2} V(S) + (3/2) int_0^S r^{-5/2} V(r) dr;
/// V(r) / r^3 is held at its value at r = 2h below that radius. The mantle
/// {t = -rho(x)} carries the area weight sqrt(1 + |grad rho|^2) over each x.
inline PolarIntegrals polar_integral_estimates(const GeodesicField& gf, double S) {
  const Grid& g = gf.grid();
  const double h = g.h_min();
  S = std::abs(S);
  if (!(S <= gf.rho_max)) throw PreconditionError("polar integrals need |S| <= rho_max");
  std::vector<std::pair<double, double>> samples;  // (rho, mantle weight)
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double r = gf.rho[p];
    if (!std::isfinite(r) || r >= S) continue;
    if (gf.avoid_obstacle && g.masked(p)) continue;
    samples.emplace_back(r, std::sqrt(1.0 + gf.grad_rho[p].squaredNorm()));
  }
  std::sort(samples.begin(), samples.end());
  const double rmin = 2.0 * h;
  if (samples.empty() || S <= rmin) throw PreconditionError("polar integrals: shells with no nodes");
  std::vector<double> cum_w(samples.size() + 1, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) cum_w[i + 1] = cum_w[i] + samples[i].second;
  const double vol = g.cell_volume();
  auto volume = [&](double r, bool weighted) {
    const auto it = std::lower_bound(samples.begin(), samples.end(), std::make_pair(r, -1.0));
    const auto n = static_cast<std::size_t>(it - samples.begin());
    return vol * (weighted ? cum_w[n] : static_cast<double>(n));
  };
  PolarIntegrals out;
  out.S = S;
  for (int weighted = 0; weighted < 2; ++weighted) {
    const double w_small = volume(rmin, weighted) / (rmin * rmin * rmin);
    auto ratio = [&](double r) { return r < rmin ? w_small : volume(r, weighted) / (r * r * r); };
    // int_0^S r^{1/2} W(r) dr with W = V / r^3: substitute r = s^2 to remove the endpoint singularity.
    const int n = 4000;
    const double smax = std::sqrt(S);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = (i + 0.5) * smax / n;
      const double r = s * s;
      acc += std::sqrt(r) * ratio(r) * 2.0 * s;
    }
    acc *= smax / n;
    const double total = std::pow(S, -1.5) * volume(S, weighted) + 1.5 * acc;
    (weighted ? out.I2 : out.I1) = total;
  }
  return out;
}

/// Least-squares exponent of I(S) ~ C S^p.
inline double fitted_exponent(const std::vector<double>& s, const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double x = std::log(std::abs(s[i])), y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace conelab
