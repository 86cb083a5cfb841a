#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "conelab/energy.hpp"

namespace conelab {

/// Q, P, R of the multiplier identity
///   (t u_t + X.grad u + u)(u_tt - div(A grad u) + u^5) = d_t(t Q + u_t u) - d_i(t P^i) + R,
/// with X = rho A grad rho = A grad(rho^2 / 2) and t the apex-shifted time.
/// R = coef_ut2 u_t^2 + hess_term + coef_grad2 |grad u|_g^2 + coef_u6 u^6.
struct MultiplierFields {
  ScalarField Q;
  VectorField P;
  ScalarField R;
  double t = 0.0;
  ScalarField coef_ut2;    // div X / 2 - 3/2
  ScalarField hess_term;   // D^2(rho^2 / 2)(A grad u, A grad u)
  ScalarField coef_grad2;  // 1/2 - div X / 2
  ScalarField coef_u6;     // 5/6 - div X / 6
};

/// Nodes where the multiplier fields are evaluated with central stencils:
/// geodesic-valid and two cells clear of the mask and the box.
inline bool multiplier_node(const GeodesicField& gf, std::size_t p) {
  return gf.is_valid(p) && gf.grid().stencil_clear(p, 2);
}

/// X = rho A grad rho.
inline VectorField multiplier_vector(const GeodesicField& gf) {
  return map_nodes<Vec3>(gf.rho.grid_ptr(), [&](std::size_t p) { return Vec3(gf.rho[p] * gf.gradg_rho[p]); });
}

/// Node-wise Q, P, R at apex-shifted time t on fluid nodes with finite rho
/// (masked nodes hold 0). Only multiplier_node nodes carry the identity.
inline MultiplierFields qpr_fields(const Snapshot& s, const GeodesicField& gf, const MetricField& m, double t) {
  if (t == 0.0) throw PreconditionError("multiplier fields need t != 0 (apex slice)");
  require_same_grid(s.u, m.A());
  require_same_grid(s.u, gf.rho);
  const GridPtr& gp = s.u.grid_ptr();
  const VectorField du = gradient_fd(s.u);
  const VectorField x = multiplier_vector(gf);
  MultiplierFields f{ScalarField(gp), VectorField(gp), ScalarField(gp), t,
                     ScalarField(gp), ScalarField(gp), ScalarField(gp), ScalarField(gp)};
  parallel_for(gp->size(), [&](std::size_t p) {
    if (gp->masked(p) || !std::isfinite(gf.rho[p])) return;
    const double u = s.u[p], ut = s.ut[p], u2 = u * u, u6 = u2 * u2 * u2;
    const Vec3 adu = m.A()[p] * du[p];
    const double grad2 = du[p].dot(adu), xu = x[p].dot(du[p]), divx = gf.div_rho_gradg[p];
    f.Q[p] = 0.5 * (ut * ut + grad2 + u6 / 3.0) + ut * xu / t;
    f.P[p] = (x[p] / t) * (0.5 * (ut * ut - grad2 - u6 / 3.0)) + adu * (ut + xu / t + u / t);
    f.coef_ut2[p] = 0.5 * divx - 1.5;
    f.hess_term[p] = adu.dot(gf.hess_half_rho2[p] * adu);
    f.coef_grad2[p] = 0.5 - 0.5 * divx;
    f.coef_u6[p] = 5.0 / 6.0 - divx / 6.0;
    f.R[p] = f.coef_ut2[p] * ut * ut + f.hess_term[p] + f.coef_grad2[p] * grad2 + f.coef_u6[p] * u6;
  });
  return f;
}

struct IdentityResidual {
  ScalarField residual;
  double l2 = 0.0;
};

/// RHS - LHS of the multiplier identity at the middle of three equally spaced
/// levels of any smooth space-time field (not necessarily a solution). t0 is
/// the apex time, so the identity is evaluated at t = levels[1].t - t0.
inline IdentityResidual identity_residual(const std::vector<Snapshot>& levels, const GeodesicField& gf,
                                          const MetricField& m, double t0) {
  if (levels.size() != 3) throw PreconditionError("multiplier identity needs three time levels");
  const double dt = levels[1].t - levels[0].t;
  if (!(dt > 0.0) || std::abs((levels[2].t - levels[1].t) - dt) > 1e-9 * dt)
    throw PreconditionError("time levels must be equally spaced");
  for (const Snapshot& s : levels)
    if (s.t == t0) throw PreconditionError("multiplier identity is not defined on the apex slice");
  const GridPtr& gp = levels[1].u.grid_ptr();
  auto density = [&](const Snapshot& s) {
    const MultiplierFields f = qpr_fields(s, gf, m, s.t - t0);
    return map_nodes<double>(gp, [&](std::size_t p) { return f.t * f.Q[p] + s.ut[p] * s.u[p]; });
  };
  const ScalarField d0 = density(levels[0]), d2 = density(levels[2]);
  const Snapshot& mid = levels[1];
  const MultiplierFields f = qpr_fields(mid, gf, m, mid.t - t0);
  const VectorField tp = map_nodes<Vec3>(gp, [&](std::size_t p) { return Vec3(f.t * f.P[p]); });
  const ScalarField div_tp = divergence_fd(tp);
  const VectorField du = gradient_fd(mid.u);
  const VectorField adu = map_nodes<Vec3>(gp, [&](std::size_t p) { return Vec3(m.A()[p] * du[p]); });
  const ScalarField div_adu = divergence_fd(adu);
  const VectorField x = multiplier_vector(gf);
  IdentityResidual out{ScalarField(gp), 0.0};
  parallel_for(gp->size(), [&](std::size_t p) {
    if (!multiplier_node(gf, p)) return;
    const double u = mid.u[p], ut = mid.ut[p];
    const double utt = (levels[2].ut[p] - levels[0].ut[p]) / (2.0 * dt);
    const double lhs = (f.t * ut + x[p].dot(du[p]) + u) * (utt - div_adu[p] + u * u * u * u * u);
    const double rhs = (d2[p] - d0[p]) / (2.0 * dt) - div_tp[p] + f.R[p];
    out.residual[p] = rhs - lhs;
  });
  out.l2 = l2_norm(out.residual, [&](std::size_t p) { return multiplier_node(gf, p); });
  return out;
}

/// Terms of <grad_g f, grad_g(X f)>_g = <nabla_{grad_g f} X, grad_g f>_g + X(|grad_g f|_g^2 / 2).
struct GradientPairingTerms {
  ScalarField term1;
  ScalarField term2;
  ScalarField term3;
  ScalarField residual;  // term1 - term2 - term3
};

/// Node-wise terms on nodes two cells clear of the mask and the box (0 elsewhere).
/// A region reaching closer to the mask or the box is rejected.
inline GradientPairingTerms gradient_pairing_residual(const ScalarField& f, const VectorField& x, const MetricField& m,
                                     const std::function<bool(std::size_t)>& region = {}) {
  require_same_grid(f, m.A());
  require_same_grid(f, x);
  const Grid& g = f.grid();
  auto inside = [&](std::size_t p) { return region ? region(p) : g.stencil_clear(p, 2); };
  for (std::size_t p = 0; p < g.size(); ++p)
    if (inside(p) && !g.stencil_clear(p, 2))
      throw PreconditionError("gradient pairing region touches the mask or the box at node " + std::to_string(p));
  const GridPtr& gp = f.grid_ptr();
  const VectorField df = gradient_fd(f);
  const ScalarField xf = map_nodes<double>(gp, [&](std::size_t p) { return x[p].dot(df[p]); });
  const ScalarField half_norm = map_nodes<double>(gp, [&](std::size_t p) { return 0.5 * df[p].dot(m.A()[p] * df[p]); });
  const VectorField dxf = gradient_fd(xf), dnorm = gradient_fd(half_norm);
  const MatrixField jac = jacobian_fd(x);
  GradientPairingTerms t{ScalarField(gp), ScalarField(gp), ScalarField(gp), ScalarField(gp)};
  parallel_for(gp->size(), [&](std::size_t p) {
    if (!inside(p)) return;
    const Vec3 y = m.A()[p] * df[p];
    t.term1[p] = y.dot(dxf[p]);
    const Vec3 cov = covariant_derivative(christoffel_at(m, p), jac[p], x[p], y);
    t.term2[p] = cov.dot(m.g()[p] * y);
    t.term3[p] = x[p].dot(dnorm[p]);
    t.residual[p] = t.term1[p] - t.term2[p] - t.term3[p];
  });
  return t;
}

/// Residual of <grad_g u, grad_g(X.grad u)>_g = D^2(rho^2 / 2)(grad_g u, grad_g u) + X(|grad_g u|_g^2 / 2)
/// with the covariant Hessian of the geodesic field, on multiplier nodes.
inline ScalarField hessian_substitution_residual(const ScalarField& u, const GeodesicField& gf, const MetricField& m) {
  require_same_grid(u, m.A());
  require_same_grid(u, gf.rho);
  const GridPtr& gp = u.grid_ptr();
  const VectorField du = gradient_fd(u);
  const VectorField x = multiplier_vector(gf);
  const ScalarField xu = map_nodes<double>(gp, [&](std::size_t p) { return x[p].dot(du[p]); });
  const ScalarField half_norm = map_nodes<double>(gp, [&](std::size_t p) { return 0.5 * du[p].dot(m.A()[p] * du[p]); });
  const VectorField dxu = gradient_fd(xu), dnorm = gradient_fd(half_norm);
  ScalarField out(gp);
  parallel_for(gp->size(), [&](std::size_t p) {
    if (!multiplier_node(gf, p)) return;
    const Vec3 y = m.A()[p] * du[p];
    out[p] = y.dot(dxu[p]) - y.dot(gf.hess_half_rho2[p] * y) - x[p].dot(dnorm[p]);
  });
  return out;
}

/// Closed-form space-time field: value, time derivative and spatial gradient.
struct SpaceTimeFunction {
  std::function<double(double, const Vec3&)> u;
  std::function<double(double, const Vec3&)> ut;
  std::function<Vec3(double, const Vec3&)> grad;
};

/// Residual of a^{ij} rho_j v_i = -u_t + a^{ij} rho_j u_i for the mantle trace
/// v(y) = u(t0 - rho(y), y), with the left side from differences of the sampled v.
/// Nodes with rho < rho_min or outside multiplier_node hold 0.
inline ScalarField mantle_parameterization_residual(const SpaceTimeFunction& fn, const GeodesicField& gf, double t0,
                                                     double rho_min) {
  const GridPtr& gp = gf.rho.grid_ptr();
  const Grid& g = *gp;
  const ScalarField v = map_nodes<double>(gp, [&](std::size_t p) {
    return std::isfinite(gf.rho[p]) ? fn.u(t0 - gf.rho[p], g.position(p)) : 0.0;
  });
  const VectorField dv = gradient_fd(v, gf.avoid_obstacle ? MaskPolicy::respect : MaskPolicy::ignore);
  ScalarField out(gp);
  parallel_for(g.size(), [&](std::size_t p) {
    if (!multiplier_node(gf, p) || gf.rho[p] < rho_min) return;
    const Vec3 x = g.position(p);
    const double t = t0 - gf.rho[p];
    out[p] = gf.gradg_rho[p].dot(dv[p]) - (-fn.ut(t, x) + gf.gradg_rho[p].dot(fn.grad(t, x)));
  });
  return out;
}

/// One sample of the cone budget at apex-shifted time S < 0, every term divided
/// by |S| (the form in which the right side tends to 0 with S).
struct BudgetRow {
  double S = 0.0;
  double lhs_l6 = 0.0;          // int_{D(S)} u^6 / 6
  double flux_term = 0.0;       // Flux(u, M_S^0)
  double flux_cbrt_term = 0.0;  // (1 + |S|) Flux^{1/3}
  double s2_e0_term = 0.0;      // |S| E0^{1/3}
  double bulk_term = 0.0;       // int_{K_S^0} rho (u_t^2 + |grad u|_g^2 + u^6) / |S|
  double trace_term = 0.0;      // |S| E0
  double rhs() const { return flux_term + flux_cbrt_term + s2_e0_term + bulk_term + trace_term; }
};

struct BudgetReport {
  std::vector<BudgetRow> rows;  // ordered by decreasing |S|
  double constant = 0.0;        // least C with lhs <= C rhs on every row
  double tolerance = 0.0;       // eps_h = 1e-2 E0
  // Shape of the right side: Flux(M_S^0) nonincreasing as |S| shrinks (up to
  // eps_h) and bulk_term <= 3 |S| E0, since rho <= |t| on D(t) and
  // u_t^2 + |grad u|_g^2 + u^6 <= 6 e(u).
  bool shape_ok = false;
  std::size_t first_shape_violation = 0;
  double final_over_max = 0.0;  // lhs at the smallest |S| over max lhs
  bool vanishes = false;        // final_over_max <= 0.1
};

/// Cone budget from a ledger recorded up to the apex time (to within one step).
/// Samples every recorded S with 2h <= |S|; the apex row closes the flux.
inline BudgetReport cone_budget(const ConeLedger& l, const ConeSpec& c) {
  if (l.size() < 4) throw PreconditionError("cone budget needs a recorded run");
  const double dt = l.t[1] - l.t[0];
  if (l.t.back() < c.t0 - 1.5 * dt || l.t.back() > c.t0 + 1e-9 * dt)
    throw PreconditionError("cone budget needs states up to the apex time");
  const double h = c.geodesic->grid().h_min();
  const std::size_t last = l.size() - 1;
  BudgetReport rep;
  for (std::size_t i = 0; i < last; ++i) {
    const double S = l.t[i] - c.t0, a = -S;
    if (a < 2.0 * h) break;
    BudgetRow r;
    r.S = S;
    r.lhs_l6 = l.l6_mass[i];
    r.flux_term = std::max(0.0, l.cone_energy[i] - l.cone_energy[last]);
    r.flux_cbrt_term = (1.0 + a) * std::cbrt(r.flux_term);
    r.s2_e0_term = a * std::cbrt(l.e0);
    r.bulk_term = trapezoid(l.t, l.bulk, i, last) / a;
    r.trace_term = a * l.e0;
    rep.rows.push_back(r);
  }
  if (rep.rows.size() < 4) throw PreconditionError("too few budget samples with |S| >= 2h");
  rep.tolerance = 1e-2 * l.e0;
  double max_lhs = 0.0;
  for (const BudgetRow& r : rep.rows) {
    max_lhs = std::max(max_lhs, r.lhs_l6);
    if (r.rhs() > 0.0) rep.constant = std::max(rep.constant, r.lhs_l6 / r.rhs());
  }
  rep.shape_ok = true;
  for (std::size_t i = 0; i < rep.rows.size() && rep.shape_ok; ++i) {
    const BudgetRow& r = rep.rows[i];
    const bool flux_ok = i == 0 || r.flux_term <= rep.rows[i - 1].flux_term + rep.tolerance;
    const bool bulk_ok = r.bulk_term <= 3.0 * (-r.S) * l.e0 * (1.0 + 1e-9) + 1e-300;
    if (!flux_ok || !bulk_ok) {
      rep.shape_ok = false;
      rep.first_shape_violation = i;
    }
  }
  rep.final_over_max = max_lhs > 0.0 ? rep.rows.back().lhs_l6 / max_lhs : 0.0;
  rep.vanishes = rep.final_over_max <= 0.1;
  return rep;
}

}  // namespace conelab
