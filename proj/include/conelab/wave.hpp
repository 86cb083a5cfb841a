#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>

#include "conelab/metric.hpp"
#include "conelab/reduce.hpp"

namespace conelab {

/// Two consecutive time levels of the leapfrog scheme; t is the time of u_curr.
struct WaveState {
  ScalarField u_prev;
  ScalarField u_curr;
  double t = 0.0;
  double dt = 0.0;
  long step = 0;
};

/// Polynomial bump amp * (1 - |x - c|^2 / r^2)^n, n - 1 continuous derivatives.
struct Bump {
  Vec3 center = Vec3::Zero();
  double radius = 0.3;
  double amp = 1.0;
  int power = 6;

  double value(const Vec3& x) const {
    const double q = (x - center).squaredNorm() / (radius * radius);
    if (q >= 1.0) return 0.0;
    return amp * std::pow(1.0 - q, power);
  }
  Vec3 grad(const Vec3& x) const {
    const double q = (x - center).squaredNorm() / (radius * radius);
    if (q >= 1.0) return Vec3::Zero();
    return amp * (-2.0 * power * std::pow(1.0 - q, power - 1) / (radius * radius)) * (x - center);
  }
  double laplacian(const Vec3& x) const {
    const double q = (x - center).squaredNorm() / (radius * radius);
    if (q >= 1.0) return 0.0;
    const double n = power, r2 = radius * radius;
    return amp * (-6.0 * n * std::pow(1.0 - q, n - 1) + 4.0 * n * (n - 1) * q * std::pow(1.0 - q, n - 2)) / r2;
  }
};

/// Cauchy data (f, g) with a Euclidean distance-to-support function used by
/// the finite-speed checks.
struct InitialData {
  ScalarField f;
  ScalarField g;
  double support_radius = 0.0;
  std::function<double(const Vec3&)> support_distance;
  std::string name;
};

namespace detail {

inline void require_clear_of_dirichlet(const InitialData& d) {
  const Grid& g = d.f.grid();
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (d.f[p] == 0.0 && d.g[p] == 0.0) continue;
    if (g.frame_distance(p) <= 4 || g.mask_distance(p, 5) <= 4)
      throw PreconditionError("initial data must vanish within 4h of the obstacle and the outer box (node " +
                              std::to_string(p) + ")");
  }
}

}  // namespace detail

/// f = bump_f, g = bump_g sharing one center and radius.
inline InitialData bump_data(const GridPtr& grid, const Vec3& center, double radius, double amp_f,
                             double amp_g, int power = 6) {
  const Bump bf{center, radius, amp_f, power}, bg{center, radius, amp_g, power};
  InitialData d{ScalarField::sample(grid, [&](const Vec3& x) { return bf.value(x); }),
                ScalarField::sample(grid, [&](const Vec3& x) { return bg.value(x); }),
                radius,
                [=](const Vec3& x) { return std::max(0.0, (x - center).norm() - radius); },
                "bump"};
  detail::require_clear_of_dirichlet(d);
  return d;
}

/// Spherical shell of radius R and half-width w moving inward at unit speed:
/// f = amp R B((r - R) / w) / r and g = f' along the incoming characteristic.
inline InitialData incoming_shell(const GridPtr& grid, const Vec3& center, double shell_radius, double width,
                                  double amp) {
  auto profile = [=](double s, double& v, double& dv) {
    const double q = s * s;
    if (q >= 1.0) {
      v = dv = 0.0;
      return;
    }
    v = std::pow(1.0 - q, 6);
    dv = -12.0 * s * std::pow(1.0 - q, 5);
  };
  auto f_of = [=](const Vec3& x) {
    const double r = (x - center).norm();
    double v, dv;
    profile((r - shell_radius) / width, v, dv);
    return r > 0.0 ? amp * shell_radius * v / r : 0.0;
  };
  // u = F(r + t) / r, so u_t = F'(r) / r.
  auto g_of = [=](const Vec3& x) {
    const double r = (x - center).norm();
    double v, dv;
    profile((r - shell_radius) / width, v, dv);
    return r > 0.0 ? amp * shell_radius * dv / (width * r) : 0.0;
  };
  InitialData d{ScalarField::sample(grid, f_of), ScalarField::sample(grid, g_of), shell_radius + width,
                [=](const Vec3& x) {
                  return std::max(0.0, std::abs((x - center).norm() - shell_radius) - width);
                },
                "incoming_shell"};
  detail::require_clear_of_dirichlet(d);
  return d;
}

/// dt = 0.5 h_min / sqrt(3 c2).
inline double cfl_dt(const MetricField& m) { return 0.5 * m.grid().h_min() / std::sqrt(3.0 * m.c2()); }

/// div(A grad u) with central differences and zero extension, evaluated on
/// interior nodes; zero on Dirichlet and masked nodes.
inline ScalarField wave_operator(const ScalarField& u, const MetricField& m) {
  require_same_grid(u, m.A());
  const Grid& g = u.grid();
  VectorField flux = gradient_zero_ext(u);
  parallel_for(g.size(), [&](std::size_t p) { flux[p] = m.A()[p] * flux[p]; });
  ScalarField out(u.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    if (!g.active(p)) return;
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += detail::axis_central_zero_ext(flux, p, a)[a];
    out[p] = s;
  });
  return out;
}

/// u_t at the middle level: (u_next - u_prev) / (2 dt).
inline ScalarField centered_velocity(const ScalarField& u_prev, const ScalarField& u_next, double dt) {
  require_same_grid(u_prev, u_next);
  return map_nodes<double>(u_prev.grid_ptr(), [&](std::size_t p) { return (u_next[p] - u_prev[p]) / (2.0 * dt); });
}

/// u and u_t at one time level, the input of every diagnostic.
struct Snapshot {
  double t = 0.0;
  ScalarField u;
  ScalarField ut;
};

/// Snapshot at the middle level of two consecutive states (after = step(before)).
inline Snapshot snapshot_between(const WaveState& before, const WaveState& after) {
  return {before.t, after.u_prev, centered_velocity(before.u_prev, after.u_curr, before.dt)};
}

/// Leapfrog integrator for u_tt - div(A grad u) + [u^5] = [F] with u = 0 on
/// Dirichlet and masked nodes.
class WaveSolver {
 public:
  WaveSolver(std::shared_ptr<const MetricField> metric, bool nonlinear)
      : m_(std::move(metric)), nonlinear_(nonlinear) {}

  const MetricField& metric() const { return *m_; }
  bool nonlinear() const { return nonlinear_; }

  /// First state from Cauchy data by the Taylor step
  /// u1 = f + dt g + dt^2 / 2 (div(A grad f) - f^5 + F(0)).
  WaveState start(const InitialData& d, double dt, const ScalarField* forcing = nullptr) const {
    check_dt(dt);
    require_same_grid(d.f, m_->A());
    const ScalarField lf = wave_operator(d.f, *m_);
    WaveState s;
    s.u_prev = d.f;
    s.u_curr = ScalarField(d.f.grid_ptr());
    const Grid& g = m_->grid();
    parallel_for(g.size(), [&](std::size_t p) {
      if (!g.active(p)) return;
      double acc = lf[p] - (nonlinear_ ? std::pow(d.f[p], 5) : 0.0) + (forcing ? (*forcing)[p] : 0.0);
      s.u_curr[p] = d.f[p] + dt * d.g[p] + 0.5 * dt * dt * acc;
    });
    zero_dirichlet(s.u_prev);
    s.t = dt;
    s.dt = dt;
    s.step = 1;
    check_finite(s.u_curr, s.step);
    return s;
  }

  /// One leapfrog step; `forcing` is F at the time of s.u_curr.
  WaveState step(const WaveState& s, const ScalarField* forcing = nullptr) const {
    check_dt(s.dt);
    const ScalarField lu = wave_operator(s.u_curr, *m_);
    WaveState out;
    out.u_prev = s.u_curr;
    out.u_curr = ScalarField(s.u_curr.grid_ptr());
    const Grid& g = m_->grid();
    const double dt2 = s.dt * s.dt;
    parallel_for(g.size(), [&](std::size_t p) {
      if (!g.active(p)) return;
      const double u = s.u_curr[p];
      double acc = lu[p];
      if (nonlinear_) acc -= u * u * u * u * u;
      if (forcing) acc += (*forcing)[p];
      out.u_curr[p] = 2.0 * u - s.u_prev[p] + dt2 * acc;
    });
    out.t = s.t + s.dt;
    out.dt = s.dt;
    out.step = s.step + 1;
    check_finite(out.u_curr, out.step);
    return out;
  }

  /// The same two levels read backwards in time: stepping the result undoes
  /// the steps that produced s.
  static WaveState reverse(const WaveState& s) {
    WaveState r;
    r.u_prev = s.u_curr;
    r.u_curr = s.u_prev;
    r.t = s.t - s.dt;
    r.dt = -s.dt;
    r.step = s.step;
    return r;
  }

  void zero_dirichlet(ScalarField& u) const {
    const Grid& g = u.grid();
    parallel_for(g.size(), [&](std::size_t p) {
      if (!g.active(p)) u[p] = 0.0;
    });
  }

 private:
  void check_dt(double dt) const {
    const double limit = cfl_dt(*m_);
    if (!(std::abs(dt) > 0.0) || std::abs(dt) > limit * (1.0 + 1e-12))
      throw PreconditionError("time step " + std::to_string(dt) + " violates the CFL limit " +
                              std::to_string(limit));
  }
  static void check_finite(const ScalarField& u, long step) {
    for (double v : u.values())
      if (!std::isfinite(v)) throw NumericalError("non-finite solution value at step " + std::to_string(step));
  }

  std::shared_ptr<const MetricField> m_;
  bool nonlinear_;
};

/// Largest |u| at nodes farther than sqrt(c2) t + 4h from the initial support.
inline double outside_light_cone(const ScalarField& u, const InitialData& d, double t, double c2) {
  const Grid& g = u.grid();
  const double reach = std::sqrt(c2) * std::abs(t) + 4.0 * g.h_min();
  double worst = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (d.support_distance(g.position(p)) > reach) worst = std::max(worst, std::abs(u[p]));
  return worst;
}

/// Normal derivative of u on boundary nodes: second-order one-sided difference
/// along the obstacle's unit normal (pointing into the fluid), sampled by
/// trilinear interpolation. Non-boundary nodes hold 0.
inline ScalarField boundary_normal_trace(const ScalarField& u) {
  const Grid& g = u.grid();
  if (!g.has_obstacle()) throw PreconditionError("normal trace needs an obstacle");
  ScalarField out(u.grid_ptr());
  const auto& nodes = g.boundary_nodes();
  parallel_for(nodes.size(), [&](std::size_t n) {
    const std::size_t p = nodes[n];
    const Vec3 x = g.position(p);
    const Vec3 nu = g.obstacle()->normal(x);
    for (int k = 1; k <= 4; ++k) {
      const double s = k * g.h_min();
      double u1, u2;
      if (interpolate(u, x + s * nu, u1) && interpolate(u, x + 2.0 * s * nu, u2)) {
        out[p] = (-3.0 * u[p] + 4.0 * u1 - u2) / (2.0 * s);
        return;
      }
    }
  });
  return out;
}

inline ScalarField boundary_normal_trace(const WaveState& s) { return boundary_normal_trace(s.u_curr); }

/// Surface measure per boundary node: the obstacle area from a co-area sum of
/// a hat kernel of the level function, spread evenly over the boundary nodes.
inline double boundary_node_area(const Grid& g) {
  if (!g.has_obstacle()) throw PreconditionError("boundary area needs an obstacle");
  const double h = g.h_min();
  const double area = integrate_nodes(
      g,
      [&](std::size_t p) {
        const double s = std::abs(g.obstacle()->level(g.position(p))) / h;
        return s < 1.0 ? (1.0 - s) / h : 0.0;
      },
      [](std::size_t) { return true; });
  return area / static_cast<double>(g.boundary_nodes().size());
}

}  // namespace conelab
