#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "conelab/scenario.hpp"

namespace conelab {

/// Built-in scenarios as INI text (mirrored in configs/<name>.ini).
inline const std::vector<std::pair<std::string, std::string>>& builtin_scenarios() {
  static const std::vector<std::pair<std::string, std::string>> all{
      {"flat_sanity", R"ini([scenario]
name = flat_sanity
description = Flat metric, wide quartic bump, one light-crossing of the box. Energy conservation, cone monotonicity, flux identity and decay, nonconcentration of the L6 cone mass on dispersive data, Strichartz-pair norm series.

[grid]
cells = 64
half_width = 1.0

[metric]
name = flat

[data]
kind = bump
center = 0 0 0
radius = 0.8
amp_f = 0.5
amp_g = 0.0
power = 4

[cone]
t0 = 1.0
x0 = 0 0 0

[run]
t_end = 2.0
cfl = 0.5
nonlinear = true
seed = 1

[diagnostics]
norms = true
norm_q = 12

[assert]
energy_drift = 1e-3
cone_monotone = 1e-2
flux_identity = 0.05
flux_decay = 1e-2
l6_decay = 0.1
)ini"},
      {"variable_metric", R"ini([scenario]
name = variable_metric
description = Wavy anisotropic metric with a bump; cone energy monotonicity, flux identity and decay on the backward cone of the distance function.

[grid]
cells = 64
half_width = 1.0

[metric]
name = wavy
eps = 0.3
k = 2.0
theta0 = 0.5

[data]
kind = bump
center = 0.05 0 0
radius = 0.45
amp_f = 0.5
amp_g = 0.0
power = 4

[cone]
t0 = 0.6
x0 = 0.1 0 0

[run]
t_end = 0.6
nonlinear = true

[diagnostics]
norms = true
norm_q = 12
norm_region = cone

[assert]
cone_monotone = 1e-2
flux_identity = 0.05
flux_decay = 1e-2
)ini"},
      {"concentration_probe", R"ini([scenario]
name = concentration_probe
description = Incoming spherical shell focused toward the apex point; cone budget (lhs int u^6/6 against flux, energy and bulk terms) and its vanishing as the cone shrinks.

[grid]
cells = 64
half_width = 1.0

[metric]
name = flat

[data]
kind = shell
center = 0 0 0
radius = 0.5
width = 0.15
amp_f = 0.1

[cone]
t0 = 0.9
x0 = 0 0 0

[run]
t_end = 0.9
nonlinear = true

[diagnostics]
budget = true
norms = true
norm_q = 12
norm_region = cone

[assert]
cone_monotone = 1e-2
flux_identity = 0.05
budget_vanish = 0.1
)ini"},
      {"obstacle_trace", R"ini([scenario]
name = obstacle_trace
description = Bump scattering off a spherical obstacle with zero Dirichlet data; L2 norm of the normal-derivative trace on the obstacle over the run, relative to the energy.

[grid]
cells = 64
half_width = 1.0

[metric]
name = flat

[obstacle]
kind = sphere
center = 0.35 0 0
radius = 0.12

[data]
kind = bump
center = -0.3 0 0
radius = 0.3
amp_f = 1.0
amp_g = 0.0
power = 4

[cone]
t0 = 0.8
x0 = -0.3 0 0

[run]
t_end = 0.8
nonlinear = true

[assert]
cone_monotone = 1e-2
flux_identity = 0.05
trace_finite = 1e6
)ini"},
      {"boundary_apex", R"ini([scenario]
name = boundary_apex
description = Cone apex on the surface of a spherical obstacle; tangency of the distance gradient to the boundary near the apex, plus cone monotonicity for a nearby bump.

[grid]
cells = 64
half_width = 1.0

[metric]
name = flat

[obstacle]
kind = sphere
center = 0 0 0
radius = 0.3

[data]
kind = bump
center = 0 0.65 0
radius = 0.2
amp_f = 1.0
amp_g = 0.0
power = 6

[cone]
t0 = 0.6
x0 = 0.3 0 0

[run]
t_end = 0.6
nonlinear = true

[diagnostics]
tangency = true

[assert]
cone_monotone = 1e-2
tangency_exponent = 1.5
)ini"},
      {"geometry_only", R"ini([scenario]
name = geometry_only
description = No PDE. Distance function of the wavy metric: eikonal residual, small-rho limits of div(rho A grad rho) and the Hessian of rho^2/2, Hessian and Laplacian comparison bounds against measured sectional curvature, geodesic-polar integrals.

[grid]
cells = 64
half_width = 1.0

[metric]
name = wavy

[cone]
x0 = 0.05 0 0

[diagnostics]
geometry = true

[assert]
small_rho = 0.05
comparison = 0
)ini"},
      {"identity_suite", R"ini([scenario]
name = identity_suite
description = No PDE. Residuals of the multiplier identity, the gradient pairing identity <grad f, grad(X f)> = <nabla_{grad f} X, grad f> + X(|grad f|^2/2), the Hessian substitution and the mantle parameterisation on random smooth fields, over three dyadic grid levels on the wavy metric.

[grid]
cells = 64
half_width = 1.0

[metric]
name = wavy

[cone]
x0 = 0.03 -0.02 0.01

[run]
seed = 1

[diagnostics]
identities = true
levels = 3
identity_seeds = 2

[assert]
identity_orders = 0
)ini"},
  };
  return all;
}

inline bool is_builtin(const std::string& name) {
  for (const auto& [n, text] : builtin_scenarios())
    if (n == name) return true;
  return false;
}

inline RunConfig builtin_config(const std::string& name) {
  for (const auto& [n, text] : builtin_scenarios())
    if (n == name) return parse_run_config(text);
  throw PreconditionError("unknown scenario '" + name + "'");
}

inline std::vector<std::string> list_scenarios() {
  std::vector<std::string> out;
  for (const auto& [n, text] : builtin_scenarios()) out.push_back(n);
  return out;
}

/// Description and enabled checks of a built-in scenario.
inline std::string describe(const std::string& name) {
  const auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  const RunConfig c = builtin_config(name);
  std::string out = c.name + ": " + c.description + "\n  grid " + std::to_string(c.cells) + "^3, metric " + c.metric;
  if (c.obstacle != "none") out += ", obstacle " + c.obstacle;
  if (c.data != "none") out += ", data " + c.data + ", t_end " + fmt(c.t_end);
  out += "\n  checks:";
  for (const auto& [k, v] : c.asserts) out += " " + k + "(" + fmt(v) + ")";
  return out + "\n";
}

}  // namespace conelab
