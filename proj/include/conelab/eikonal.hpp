#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "conelab/metric.hpp"

namespace conelab {

struct EikonalOptions {
  /// Solve for tau = rho / rho0 with rho0 the distance of the frozen metric g(x0).
  bool factored = true;
  /// Refine the first-order fixed point with third-order WENO differences.
  bool high_order = true;
  /// Treat masked nodes as walls (distance around the obstacle) instead of
  /// measuring straight through the smoothly extended metric.
  bool avoid_obstacle = false;
  double tolerance = 1e-11;
  int max_iterations = 400;
};

struct EikonalResult {
  ScalarField rho;
  std::vector<double> update_history;  // max |change| per iteration (8 sweeps)
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Lax-Friedrichs fast sweeping for a^{ij} rho_i rho_j = 1.
class LaxFriedrichsSweeper {
 public:
  LaxFriedrichsSweeper(const MetricField& m, const Vec3& x0, const EikonalOptions& opt)
      : m_(m), g_(m.grid()), opt_(opt) {
    // Around an obstacle the straight-line factor is a spurious local solution
    // in the shadow and WENO loses monotonicity at the ghosts, so the
    // obstacle-avoiding mode runs the plain first-order scheme.
    if (opt_.avoid_obstacle) opt_.factored = opt_.high_order = false;
    const std::size_t n = g_.size();
    rho0_.assign(n, 1.0);
    grad_rho0_.assign(n, Vec3::Zero());
    sigma_.assign(n, Vec3::Zero());
    source_ = g_.nearest(x0);
    const Mat3 g0 = m.model().A(x0).inverse();
    for (std::size_t p = 0; p < n; ++p) {
      const Vec3 d = g_.position(p) - x0;
      if (opt_.factored) {
        rho0_[p] = std::sqrt(d.dot(g0 * d));
        grad_rho0_[p] = rho0_[p] > 0.0 ? Vec3(g0 * d / rho0_[p]) : Vec3::Zero();
      }
      const Mat3& a = m.A()[p];
      sigma_[p] = rho0_[p] * Vec3(std::sqrt(a(0, 0)), std::sqrt(a(1, 1)), std::sqrt(a(2, 2)));
    }
    usable_.assign(n, 1);
    ghost_.assign(n, 0);
    if (opt_.avoid_obstacle) {
      for (std::size_t p = 0; p < n; ++p) usable_[p] = !g_.masked(p);
      for (std::size_t p = 0; p < n; ++p) {
        if (usable_[p] || g_.frame_distance(p) < 1) continue;
        for (int a = 0; a < 3; ++a)
          if (usable_[p + g_.stride(a)] || usable_[p - g_.stride(a)]) ghost_[p] = 1;
        if (ghost_[p]) ghosts_.push_back(p);
      }
    }
    // The factored unknown is smooth up to the source and only the nearest node
    // is pinned. Without factoring, Lax-Friedrichs smears a point source, so the
    // frozen-metric distance is imposed on a small ball instead.
    const double big = 10.0 * (g_.upper() - g_.origin()).norm() / std::sqrt(m.c1());
    fixed_.assign(n, 0);
    tau_.assign(n, opt_.factored ? 1.0 : big);
    const double ball = 2.0 * std::max({g_.h(0), g_.h(1), g_.h(2)});
    for (std::size_t p = 0; p < n; ++p) {
      const Vec3 d = g_.position(p) - x0;
      const double frozen = std::sqrt(d.dot(g0 * d));
      if (p == source_ || (!opt_.factored && frozen <= ball)) {
        fixed_[p] = 1;
        tau_[p] = opt_.factored ? 1.0 : frozen;
      }
    }
  }

  EikonalResult solve() {
    EikonalResult res;
    run_stage(false, res);
    if (opt_.high_order) run_stage(true, res);
    res.rho = ScalarField(m_.grid_ptr());
    for (std::size_t p = 0; p < g_.size(); ++p)
      res.rho[p] = usable_[p] ? rho0_[p] * tau_[p] : std::numeric_limits<double>::quiet_NaN();
    return res;
  }

  const std::vector<double>& tau() const { return tau_; }
  const std::vector<double>& rho0() const { return rho0_; }
  std::size_t source() const { return source_; }

 private:
  void run_stage(bool weno, EikonalResult& res) {
    for (int it = 0; it < opt_.max_iterations; ++it) {
      double change = 0.0;
      for (int order = 0; order < 8; ++order) change = std::max(change, sweep(order, weno));
      res.update_history.push_back(change);
      ++res.iterations;
      if (!std::isfinite(change)) throw NumericalError("eikonal sweeping produced non-finite values");
      if (change < opt_.tolerance) {
        res.converged = true;
        return;
      }
    }
    res.converged = false;
  }

  // Masked nodes next to the fluid act as ghosts (obstacle-avoiding mode).
  double value(std::size_t p, std::size_t q) const { return usable_[q] || ghost_[q] ? tau_[q] : tau_[p]; }

  /// Ghost value: the largest linear extrapolation from the fluid along an axis.
  void extrapolate_ghosts() {
    for (std::size_t p : ghosts_) {
      double v = -std::numeric_limits<double>::infinity();
      const auto c = g_.coords(p);
      for (int a = 0; a < 3; ++a)
        for (int sgn : {-1, 1}) {
          const int c2 = c[a] + 2 * sgn;
          if (c2 < 0 || c2 >= g_.nodes(a)) continue;
          const std::size_t q1 = sgn > 0 ? p + g_.stride(a) : p - g_.stride(a);
          const std::size_t q2 = sgn > 0 ? q1 + g_.stride(a) : q1 - g_.stride(a);
          if (usable_[q1] && usable_[q2]) v = std::max(v, 2.0 * tau_[q1] - tau_[q2]);
        }
      if (std::isfinite(v)) tau_[p] = v;
    }
  }

  double sweep(int order, bool weno) {
    const auto& nn = g_.nodes();
    const int si = (order & 1) ? -1 : 1, sj = (order & 2) ? -1 : 1, sk = (order & 4) ? -1 : 1;
    double change = 0.0;
    for (int kk = 1; kk < nn[2] - 1; ++kk) {
      const int k = sk > 0 ? kk : nn[2] - 1 - kk;
      for (int jj = 1; jj < nn[1] - 1; ++jj) {
        const int j = sj > 0 ? jj : nn[1] - 1 - jj;
        for (int ii = 1; ii < nn[0] - 1; ++ii) {
          const int i = si > 0 ? ii : nn[0] - 1 - ii;
          const std::size_t p = g_.index(i, j, k);
          if (fixed_[p] || !usable_[p]) continue;
          const double t = update(p, {i, j, k}, weno);
          change = std::max(change, std::abs(t - tau_[p]));
          tau_[p] = t;
        }
      }
    }
    extrapolate_frame();
    extrapolate_ghosts();
    return change;
  }

  double update(std::size_t p, std::array<int, 3> c, bool weno) const {
    Vec3 pm, pp;  // one-sided derivative approximations of tau
    double visc = 0.0;
    const double tc = tau_[p];
    for (int a = 0; a < 3; ++a) {
      const std::size_t s = g_.stride(a);
      const double h = g_.h(a);
      const double tm1 = value(p, p - s), tp1 = value(p, p + s);
      double dm = (tc - tm1) / h, dp = (tp1 - tc) / h;
      if (weno) {
        const bool has_m2 = c[a] >= 2 && usable_[p - s] && usable_[p - 2 * s];
        const bool has_p2 = c[a] + 2 < g_.nodes(a) && usable_[p + s] && usable_[p + 2 * s];
        const double d2c = tp1 - 2.0 * tc + tm1;
        const double central = (tp1 - tm1) / (2.0 * h);
        constexpr double eps = 1e-12;
        if (has_m2) {
          const double tm2 = tau_[p - 2 * s];
          const double d2m = tc - 2.0 * tm1 + tm2;
          const double r = (eps + d2m * d2m) / (eps + d2c * d2c);
          const double w = 1.0 / (1.0 + 2.0 * r * r);
          dm = (1.0 - w) * central + w * (3.0 * tc - 4.0 * tm1 + tm2) / (2.0 * h);
        }
        if (has_p2) {
          const double tp2 = tau_[p + 2 * s];
          const double d2p = tc - 2.0 * tp1 + tp2;
          const double r = (eps + d2p * d2p) / (eps + d2c * d2c);
          const double w = 1.0 / (1.0 + 2.0 * r * r);
          dp = (1.0 - w) * central + w * (-3.0 * tc + 4.0 * tp1 - tp2) / (2.0 * h);
        }
      }
      pm[a] = dm;
      pp[a] = dp;
      visc += sigma_[p][a] / h;
    }
    const Vec3 pbar = 0.5 * (pm + pp);
    const Vec3 q = tc * grad_rho0_[p] + rho0_[p] * pbar;
    const double ham = std::sqrt(std::max(0.0, q.dot(m_.A()[p] * q)));
    const double numerical = ham - 0.5 * sigma_[p].dot(pp - pm);
    return tc + (1.0 - numerical) / visc;
  }

  /// Frame nodes: linear extrapolation from the two nearest layers inward, axis by axis.
  void extrapolate_frame() {
    const auto& nn = g_.nodes();
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      for (int v = 0; v < nn[c]; ++v)
        for (int u = 0; u < nn[b]; ++u)
          for (int side = 0; side < 2; ++side) {
            std::array<int, 3> idx{};
            idx[b] = u;
            idx[c] = v;
            const int edge = side ? nn[a] - 1 : 0, step = side ? -1 : 1;
            idx[a] = edge;
            const std::size_t p0 = g_.index(idx[0], idx[1], idx[2]);
            idx[a] = edge + step;
            const std::size_t p1 = g_.index(idx[0], idx[1], idx[2]);
            idx[a] = edge + 2 * step;
            const std::size_t p2 = g_.index(idx[0], idx[1], idx[2]);
            if (fixed_[p0] || !usable_[p0] || !usable_[p1] || !usable_[p2]) continue;
            tau_[p0] = 2.0 * tau_[p1] - tau_[p2];
          }
    }
  }

  const MetricField& m_;
  const Grid& g_;
  EikonalOptions opt_;
  std::size_t source_ = 0;
  std::vector<double> rho0_;
  std::vector<Vec3> grad_rho0_;
  std::vector<Vec3> sigma_;
  std::vector<std::uint8_t> usable_;
  std::vector<std::uint8_t> fixed_;
  std::vector<std::uint8_t> ghost_;
  std::vector<std::size_t> ghosts_;
  std::vector<double> tau_;
};

}  // namespace detail

/// Viscosity solution of a^{ij} rho_i rho_j = 1 with rho(x0) = 0 by
/// Lax-Friedrichs fast sweeping (8 orderings per iteration) on the factored
/// unknown tau = rho / rho0, optionally refined with WENO3 differences.
inline EikonalResult solve_eikonal_rho(const MetricField& m, const Vec3& x0, const EikonalOptions& opt = {}) {
  const Grid& g = m.grid();
  if (!g.inside_box(x0)) throw PreconditionError("source point lies outside the grid");
  detail::LaxFriedrichsSweeper sw(m, x0, opt);
  return sw.solve();
}

}  // namespace conelab
