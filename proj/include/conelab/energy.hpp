#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "conelab/geodesic.hpp"
#include "conelab/wave.hpp"

namespace conelab {

/// 1/2 (u_t^2 + a^{ij} u_i u_j + u^6 / 3) node-wise, central gradients with zero extension.
inline ScalarField energy_density(const Snapshot& s, const MetricField& m) {
  require_same_grid(s.u, m.A());
  const VectorField du = gradient_zero_ext(s.u);
  return map_nodes<double>(s.u.grid_ptr(), [&](std::size_t p) {
    const double u = s.u[p], u2 = u * u;
    return 0.5 * (s.ut[p] * s.ut[p] + du[p].dot(m.A()[p] * du[p]) + u2 * u2 * u2 / 3.0);
  });
}

inline double total_energy(const Snapshot& s, const MetricField& m) { return integrate(energy_density(s, m)); }

/// Backward cone with apex (t0, x0): D(t) = {x fluid : rho(x, x0) <= delta + t0 - t}.
struct ConeSpec {
  double t0 = 0.0;
  double delta = 0.0;
  std::shared_ptr<const GeodesicField> geodesic;

  const Vec3& x0() const { return geodesic->x0; }
  double radius(double t) const { return delta + t0 - t; }
  bool contains(std::size_t p, double t) const {
    const double r = geodesic->rho[p];
    return std::isfinite(r) && r <= radius(t);
  }
};

inline void require_cone_grid(const Snapshot& s, const ConeSpec& c) {
  if (!c.geodesic) throw PreconditionError("cone has no geodesic field");
  if (s.u.grid_ptr() != c.geodesic->rho.grid_ptr()) throw GridMismatch("snapshot and cone on different grids");
}

/// E(u, D(t)); an empty cross-section gives 0.
inline double cone_energy(const Snapshot& s, const ConeSpec& c, const MetricField& m) {
  require_cone_grid(s, c);
  const ScalarField e = energy_density(s, m);
  return integrate(e, [&](std::size_t p) { return c.contains(p, s.t); });
}

/// int_{D(t)} u^6 / 6.
inline double l6_cone_mass(const Snapshot& s, const ConeSpec& c) {
  require_cone_grid(s, c);
  return integrate_nodes(
      s.u.grid(),
      [&](std::size_t p) {
        const double u2 = s.u[p] * s.u[p];
        return u2 * u2 * u2 / 6.0;
      },
      [&](std::size_t p) { return c.contains(p, s.t); });
}

/// Energy current through the level set rho = radius(t) per unit time:
/// co-area sum over a hat kernel of half-width h of
/// 1/2 (u_t^2 + a^{ij} u_i u_j + u^6 / 3) - u_t a^{ij} u_j rho_i.
inline double mantle_rate(const Snapshot& s, const ConeSpec& c, const MetricField& m) {
  require_cone_grid(s, c);
  const Grid& g = s.u.grid();
  const double h = g.h_min(), r = c.radius(s.t);
  const GeodesicField& gf = *c.geodesic;
  const VectorField du = gradient_zero_ext(s.u);
  return integrate_nodes(
      g,
      [&](std::size_t p) {
        const double w = 1.0 - std::abs(gf.rho[p] - r) / h;
        if (w <= 0.0) return 0.0;
        const Vec3 adu = m.A()[p] * du[p];
        const double u2 = s.u[p] * s.u[p];
        const double e = 0.5 * (s.ut[p] * s.ut[p] + du[p].dot(adu) + u2 * u2 * u2 / 3.0);
        return w / h * (e - s.ut[p] * adu.dot(gf.grad_rho[p]));
      },
      [&](std::size_t p) { return g.fluid(p) && std::isfinite(gf.rho[p]); });
}

/// int_{D(t)} rho (u_t^2 + a^{ij} u_i u_j + u^6), the slice of the cone-budget bulk term.
inline double rho_weighted_energy(const Snapshot& s, const ConeSpec& c, const MetricField& m) {
  require_cone_grid(s, c);
  const VectorField du = gradient_zero_ext(s.u);
  const GeodesicField& gf = *c.geodesic;
  return integrate_nodes(
      s.u.grid(),
      [&](std::size_t p) {
        const double u2 = s.u[p] * s.u[p];
        return gf.rho[p] * (s.ut[p] * s.ut[p] + du[p].dot(m.A()[p] * du[p]) + u2 * u2 * u2);
      },
      [&](std::size_t p) { return c.contains(p, s.t); });
}

/// int over the obstacle surface of (d_nu u)^2.
inline double boundary_trace_rate(const Snapshot& s) {
  const Grid& g = s.u.grid();
  const ScalarField tr = boundary_normal_trace(s.u);
  ExactAccumulator acc;
  for (std::size_t p : g.boundary_nodes()) acc.add(tr[p] * tr[p]);
  return acc.value() * boundary_node_area(g);
}

/// Time series of the cone diagnostics, one row per solver step.
struct ConeLedger {
  std::vector<double> t;
  std::vector<double> energy;       // E(t)
  std::vector<double> cone_energy;  // E(u, D(t))
  std::vector<double> l6_mass;      // int_{D(t)} u^6 / 6
  std::vector<double> mantle;       // flux rate through rho = radius(t)
  std::vector<double> bulk;         // int_{D(t)} rho (u_t^2 + |grad u|_g^2 + u^6)
  std::vector<double> trace;        // int_{dOmega} (d_nu u)^2, empty without an obstacle
  double e0 = 0.0;

  std::size_t size() const { return t.size(); }

  void record(const Snapshot& s, const ConeSpec& c, const MetricField& m) {
    if (!t.empty() && !(s.t > t.back())) throw PreconditionError("ledger times must increase");
    t.push_back(s.t);
    energy.push_back(total_energy(s, m));
    if (t.size() == 1) e0 = energy.back();
    cone_energy.push_back(conelab::cone_energy(s, c, m));
    l6_mass.push_back(l6_cone_mass(s, c));
    mantle.push_back(mantle_rate(s, c, m));
    bulk.push_back(rho_weighted_energy(s, c, m));
    if (s.u.grid().has_obstacle()) trace.push_back(boundary_trace_rate(s));
  }

  /// Index of the row at time `time` (to 1e-9 of a step).
  std::size_t index_of(double time) const {
    if (t.empty()) throw PreconditionError("empty ledger");
    const double tol = 1e-9 * (t.size() > 1 ? t[1] - t[0] : 1.0);
    if (time < t.front() - tol || time > t.back() + tol)
      throw PreconditionError("time " + std::to_string(time) + " outside the recorded series");
    const auto it = std::lower_bound(t.begin(), t.end(), time - tol);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    if (i >= t.size() || std::abs(t[i] - time) > tol)
      throw PreconditionError("time " + std::to_string(time) + " is not a recorded sample");
    return i;
  }

  /// Relative drift max |E(t) - E0| / E0.
  double energy_drift() const {
    double d = 0.0;
    for (double e : energy) d = std::max(d, std::abs(e - e0));
    return e0 > 0.0 ? d / e0 : d;
  }
};

/// Trapezoid rule of series y over rows [i, j].
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y, std::size_t i, std::size_t j) {
  ExactAccumulator acc;
  for (std::size_t k = i; k < j; ++k) acc.add(0.5 * (t[k + 1] - t[k]) * (y[k] + y[k + 1]));
  return acc.value();
}

/// Flux(u, M_s^t) = E(u, D(s)) - E(u, D(t)).
inline double flux_from_identity(const ConeLedger& l, double s, double t) {
  if (s > t) throw PreconditionError("flux interval needs s <= t");
  return l.cone_energy[l.index_of(s)] - l.cone_energy[l.index_of(t)];
}

/// Flux through the mantle by co-area quadrature of the energy current,
/// trapezoid in time.
inline double flux_direct(const ConeLedger& l, double s, double t) {
  if (s > t) throw PreconditionError("flux interval needs s <= t");
  return trapezoid(l.t, l.mantle, l.index_of(s), l.index_of(t));
}

/// Per-interval series of both flux evaluations over consecutive rows.
struct FluxSeries {
  std::vector<double> identity;
  std::vector<double> direct;
};

inline FluxSeries flux_series(const ConeLedger& l) {
  FluxSeries f;
  for (std::size_t i = 0; i + 1 < l.size(); ++i) {
    f.identity.push_back(l.cone_energy[i] - l.cone_energy[i + 1]);
    f.direct.push_back(trapezoid(l.t, l.mantle, i, i + 1));
  }
  return f;
}

enum class DensityMode { solution, algebraic };

/// Residual of d_t(1/2 (u_t^2 + a^{ij} u_i u_j) + u^6 / 6) - d_i(u_t a^{ij} u_j) at
/// the middle of three equally spaced snapshots. In algebraic mode the exact
/// right side u_t (u_tt - div(A grad u) + u^5) is subtracted, so the result
/// vanishes in the limit for any smooth u. With nonlinear = false the u^6 and
/// u^5 terms are dropped (linear equation). Nodes closer than two cells to the
/// mask or the box hold 0.
inline ScalarField density_identity_residual(const std::vector<Snapshot>& levels, const MetricField& m,
                                             DensityMode mode = DensityMode::solution, bool nonlinear = true) {
  if (levels.size() != 3) throw PreconditionError("density identity needs three consecutive snapshots");
  const double dt = levels[1].t - levels[0].t;
  if (!(dt > 0.0) || std::abs((levels[2].t - levels[1].t) - dt) > 1e-9 * dt)
    throw PreconditionError("snapshots must be equally spaced in time");
  const Grid& g = m.grid();
  auto density = [&](const Snapshot& s) {
    const VectorField du = gradient_fd(s.u);
    return map_nodes<double>(s.u.grid_ptr(), [&](std::size_t p) {
      const double u2 = s.u[p] * s.u[p];
      return 0.5 * (s.ut[p] * s.ut[p] + du[p].dot(m.A()[p] * du[p])) + (nonlinear ? u2 * u2 * u2 / 6.0 : 0.0);
    });
  };
  const ScalarField e0 = density(levels[0]), e2 = density(levels[2]);
  const Snapshot& mid = levels[1];
  const VectorField du = gradient_fd(mid.u);
  VectorField adu(mid.u.grid_ptr()), current(mid.u.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    adu[p] = m.A()[p] * du[p];
    current[p] = mid.ut[p] * adu[p];
  });
  const ScalarField div_current = divergence_fd(current);
  const ScalarField div_adu = divergence_fd(adu);
  ScalarField out(mid.u.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    if (!g.stencil_clear(p, 2)) return;
    double r = (e2[p] - e0[p]) / (2.0 * dt) - div_current[p];
    if (mode == DensityMode::algebraic) {
      const double utt = (levels[2].ut[p] - levels[0].ut[p]) / (2.0 * dt);
      const double u = mid.u[p];
      r -= mid.ut[p] * (utt - div_adu[p] + (nonlinear ? u * u * u * u * u : 0.0));
    }
    out[p] = r;
  });
  return out;
}

/// Grid L2 norm over nodes where region(p).
template <class Region>
double l2_norm(const ScalarField& w, Region&& region) {
  return std::sqrt(integrate_nodes(
      w.grid(), [&](std::size_t p) { return w[p] * w[p]; }, region));
}

struct TraceBound {
  double norm = 0.0;   // ||d_nu u||_{L2((0, T) x dOmega)}
  double ratio = 0.0;  // norm^2 / E0
};

inline TraceBound boundary_trace_bound(const ConeLedger& l) {
  if (l.trace.empty() || l.trace.size() != l.size())
    throw PreconditionError("boundary trace bound needs an obstacle run");
  TraceBound b;
  const double sq = trapezoid(l.t, l.trace, 0, l.size() - 1);
  b.norm = std::sqrt(sq);
  b.ratio = l.e0 > 0.0 ? sq / l.e0 : 0.0;
  return b;
}

struct TangencyReport {
  std::vector<double> rho;
  std::vector<double> normal_component;  // |grad_g rho . nu|
  /// Least-squares fit of log |grad_g rho . nu| against log rho.
  double exponent = 0.0;
  double constant = 0.0;
  /// Same fit for rho grad_g rho . nu = grad_g(rho^2 / 2) . nu.
  double exponent_weighted = 0.0;
  double max_component = 0.0;
};

/// Samples grad_g rho . nu on boundary nodes with 2h <= rho <= rho_cap for an
/// apex on the discrete obstacle surface and fits |.| <= C rho^p.
inline TangencyReport tangency_check(const GeodesicField& gf, double rho_cap = 0.2, std::size_t min_samples = 6) {
  const Grid& g = gf.grid();
  if (!g.has_obstacle()) throw PreconditionError("tangency check needs an obstacle");
  if (std::abs(g.obstacle()->level(gf.x0)) > std::sqrt(3.0) * g.h_min())
    throw PreconditionError("apex is not on the obstacle boundary");
  TangencyReport rep;
  const double lo = 2.0 * g.h_min();
  // Boundary nodes sit up to a cell off the surface, which would add an O(h / rho)
  // normal component; the fields are read at the projection onto the surface
  // instead (obstacle-blind fields are smooth through it).
  const MaskPolicy policy = gf.avoid_obstacle ? MaskPolicy::respect : MaskPolicy::ignore;
  for (std::size_t p : g.boundary_nodes()) {
    const Vec3 x = g.position(p);
    const Vec3 y = x - g.obstacle()->level(x) * g.obstacle()->normal(x);
    double r = gf.rho[p];
    Vec3 grad = gf.gradg_rho[p];
    if (interpolate(gf.rho, y, r, policy)) interpolate(gf.gradg_rho, y, grad, policy);
    if (!std::isfinite(r) || r < lo || r > rho_cap) continue;
    rep.rho.push_back(r);
    rep.normal_component.push_back(std::abs(grad.dot(g.obstacle()->normal(y))));
  }
  if (rep.rho.size() < min_samples) throw PreconditionError("too few boundary samples for the tangency fit");
  for (double v : rep.normal_component) rep.max_component = std::max(rep.max_component, v);
  auto fit = [&](bool weighted, double& slope, double& intercept) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t i = 0; i < rep.rho.size(); ++i) {
      const double v = rep.normal_component[i] * (weighted ? rep.rho[i] : 1.0);
      if (!(v > 1e-14)) continue;
      const double x = std::log(rep.rho[i]), y = std::log(v);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      n += 1;
    }
    if (n < 2 || n * sxx - sx * sx <= 0.0) {
      slope = std::numeric_limits<double>::infinity();
      intercept = 0.0;
      return;
    }
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    intercept = (sy - slope * sx) / n;
  };
  double c = 0.0, cw = 0.0;
  fit(false, rep.exponent, c);
  fit(true, rep.exponent_weighted, cw);
  rep.constant = std::exp(c);
  return rep;
}

}  // namespace conelab
