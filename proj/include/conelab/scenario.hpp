#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "conelab/config.hpp"
#include "conelab/csv.hpp"
#include "conelab/curvature.hpp"
#include "conelab/multiplier.hpp"
#include "conelab/norms.hpp"
#include "conelab/smooth_fields.hpp"

namespace conelab {

/// Everything a run needs, read from the INI sections of the same names.
struct RunConfig {
  std::string name = "custom";
  std::string description;
  // [grid]
  int cells = 64;
  double half_width = 1.0;
  // [metric]
  std::string metric = "flat";  // flat | scaled | wavy | conformal_sine | sphere | scalar_sine
  double metric_eps = 0.3, metric_k = 2.0, metric_theta0 = 0.5;
  double metric_amp = 0.3, metric_kappa = 1.0, metric_scale = 1.0;
  // [obstacle]
  std::string obstacle = "none";  // none | sphere | halfspace
  Vec3 obstacle_center = Vec3::Zero();
  double obstacle_radius = 0.2;
  Vec3 obstacle_normal = Vec3::UnitX();
  // [data]
  std::string data = "none";  // none | bump | shell
  Vec3 data_center = Vec3::Zero();
  double data_radius = 0.3, amp_f = 1.0, amp_g = 0.0, width = 0.15;
  int power = 4;
  // [cone]
  double t0 = 1.0;
  Vec3 x0 = Vec3::Zero();
  double delta = 0.0;
  bool avoid_obstacle = false;
  // [run]
  double t_end = 1.0;
  double cfl = 0.5;  // dt = cfl h_min / sqrt(3 c2)
  int cadence = 1;
  bool nonlinear = true;
  unsigned seed = 1;
  int threads = 0;
  // [diagnostics]
  bool budget = false;
  bool norms = false;
  double norm_q = 12.0;
  std::string norm_region = "strip";
  bool geometry = false;
  bool tangency = false;
  bool identities = false;
  int levels = 3;
  int identity_seeds = 2;
  // [assert]: enabled checks and their limits
  std::map<std::string, double> asserts;

  std::string hash;
};

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"scenario", {"name", "description"}},
      {"grid", {"cells", "half_width"}},
      {"metric", {"name", "eps", "k", "theta0", "amp", "kappa", "scale"}},
      {"obstacle", {"kind", "center", "radius", "point", "normal"}},
      {"data", {"kind", "center", "radius", "amp_f", "amp_g", "power", "width"}},
      {"cone", {"t0", "x0", "delta", "avoid_obstacle"}},
      {"run", {"t_end", "cfl", "cadence", "nonlinear", "seed", "threads"}},
      {"diagnostics", {"budget", "norms", "norm_q", "norm_region", "geometry", "tangency", "identities", "levels",
                       "identity_seeds"}},
      {"assert", {"energy_drift", "cone_monotone", "flux_identity", "flux_decay", "budget_vanish", "l6_decay",
                  "trace_finite", "small_rho", "comparison", "tangency_exponent", "identity_orders"}},
  };
  return schema;
}

inline RunConfig parse_run_config(const IniConfig& ini) {
  ini.require_section("grid");
  ini.check_keys(config_schema());
  RunConfig c;
  c.hash = ini.hash();
  c.name = ini.get<std::string>("scenario", "name", c.name);
  c.description = ini.get<std::string>("scenario", "description", c.description);
  c.cells = ini.require<int>("grid", "cells");
  c.half_width = ini.get("grid", "half_width", c.half_width);
  if (c.cells < 4) throw ConfigError("grid cells must be at least 4", ini.line_of("grid", "cells"));
  if (!(c.half_width > 0.0)) throw ConfigError("grid half_width must be positive", ini.line_of("grid", "half_width"));

  c.metric = ini.get<std::string>("metric", "name", c.metric);
  c.metric_eps = ini.get("metric", "eps", c.metric_eps);
  c.metric_k = ini.get("metric", "k", c.metric_k);
  c.metric_theta0 = ini.get("metric", "theta0", c.metric_theta0);
  c.metric_amp = ini.get("metric", "amp", c.metric_amp);
  c.metric_kappa = ini.get("metric", "kappa", c.metric_kappa);
  c.metric_scale = ini.get("metric", "scale", c.metric_scale);
  static const std::set<std::string> metrics{"flat", "scaled", "wavy", "conformal_sine", "sphere", "scalar_sine"};
  if (!metrics.count(c.metric)) throw ConfigError("unknown metric '" + c.metric + "'", ini.line_of("metric", "name"));

  c.obstacle = ini.get<std::string>("obstacle", "kind", c.obstacle);
  c.obstacle_center = ini.get("obstacle", "center", ini.get("obstacle", "point", c.obstacle_center));
  c.obstacle_radius = ini.get("obstacle", "radius", c.obstacle_radius);
  c.obstacle_normal = ini.get("obstacle", "normal", c.obstacle_normal);
  if (c.obstacle != "none" && c.obstacle != "sphere" && c.obstacle != "halfspace")
    throw ConfigError("unknown obstacle '" + c.obstacle + "'", ini.line_of("obstacle", "kind"));

  c.data = ini.get<std::string>("data", "kind", c.data);
  c.data_center = ini.get("data", "center", c.data_center);
  c.data_radius = ini.get("data", "radius", c.data_radius);
  c.amp_f = ini.get("data", "amp_f", c.amp_f);
  c.amp_g = ini.get("data", "amp_g", c.amp_g);
  c.power = ini.get("data", "power", c.power);
  c.width = ini.get("data", "width", c.width);
  if (c.data != "none" && c.data != "bump" && c.data != "shell")
    throw ConfigError("unknown data kind '" + c.data + "'", ini.line_of("data", "kind"));

  c.t0 = ini.get("cone", "t0", c.t0);
  c.x0 = ini.get("cone", "x0", c.x0);
  c.delta = ini.get("cone", "delta", c.delta);
  c.avoid_obstacle = ini.get("cone", "avoid_obstacle", c.avoid_obstacle);

  c.t_end = ini.get("run", "t_end", c.t_end);
  c.cfl = ini.get("run", "cfl", c.cfl);
  c.cadence = ini.get("run", "cadence", c.cadence);
  c.nonlinear = ini.get("run", "nonlinear", c.nonlinear);
  c.seed = ini.get("run", "seed", c.seed);
  c.threads = ini.get("run", "threads", c.threads);
  if (!(c.cfl > 0.0 && c.cfl <= 0.5))
    throw ConfigError("run cfl must lie in (0, 0.5] (CFL limit)", ini.line_of("run", "cfl"));
  if (c.cadence < 1) throw ConfigError("run cadence must be >= 1", ini.line_of("run", "cadence"));

  c.budget = ini.get("diagnostics", "budget", c.budget);
  c.norms = ini.get("diagnostics", "norms", c.norms);
  c.norm_q = ini.get("diagnostics", "norm_q", c.norm_q);
  c.norm_region = ini.get<std::string>("diagnostics", "norm_region", c.norm_region);
  c.geometry = ini.get("diagnostics", "geometry", c.geometry);
  c.tangency = ini.get("diagnostics", "tangency", c.tangency);
  c.identities = ini.get("diagnostics", "identities", c.identities);
  c.levels = ini.get("diagnostics", "levels", c.levels);
  c.identity_seeds = ini.get("diagnostics", "identity_seeds", c.identity_seeds);
  if (c.norms && !(c.norm_q >= 6.0)) throw ConfigError("norm_q must be >= 6", ini.line_of("diagnostics", "norm_q"));
  if (c.norm_region != "strip" && c.norm_region != "cone" && c.norm_region != "expanded")
    throw ConfigError("unknown norm_region '" + c.norm_region + "'", ini.line_of("diagnostics", "norm_region"));
  if (c.budget && c.data == "none") throw ConfigError("budget needs initial data", ini.line_of("diagnostics", "budget"));

  for (const auto& key : config_schema().at("assert"))
    if (ini.has("assert", key)) c.asserts[key] = ini.require<double>("assert", key);
  return c;
}

inline RunConfig parse_run_config(const std::string& text) { return parse_run_config(IniConfig::parse(text)); }

inline MetricModelPtr make_metric_model(const RunConfig& c) {
  if (c.metric == "flat") return ConstantMetric::identity();
  if (c.metric == "scaled") return ConstantMetric::scaled(c.metric_scale);
  if (c.metric == "wavy") return std::make_shared<WavyMetric>(WavyMetric::Params{c.metric_eps, c.metric_k, c.metric_theta0});
  if (c.metric == "conformal_sine") return ConformalMetric::sine(c.metric_amp);
  if (c.metric == "sphere") return ConformalMetric::sphere(c.metric_kappa);
  return ConformalMetric::scalar_sine(c.metric_eps);
}

inline GridPtr make_grid(const RunConfig& c, int cells) {
  std::shared_ptr<const Obstacle> obs;
  if (c.obstacle == "sphere") obs = std::make_shared<SphereObstacle>(c.obstacle_center, c.obstacle_radius);
  if (c.obstacle == "halfspace") obs = std::make_shared<HalfSpaceObstacle>(c.obstacle_center, c.obstacle_normal);
  return Grid::cube(cells, c.half_width, obs);
}

inline InitialData make_data(const RunConfig& c, const GridPtr& g) {
  if (c.data == "bump") return bump_data(g, c.data_center, c.data_radius, c.amp_f, c.amp_g, c.power);
  return incoming_shell(g, c.data_center, c.data_radius, c.width, c.amp_f);
}

/// One named pass/fail line of a run.
struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
  std::string detail;
};

/// Measured convergence of one discrete identity over dyadic levels.
struct ConvergenceRow {
  std::string identity;
  unsigned seed = 0;
  std::vector<int> cells;
  std::vector<double> error;
  double order = 0.0;
  double threshold = 0.0;
  bool pass() const { return order >= threshold; }
};

/// Least-squares slope of log(err) against log(h).
inline double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < h.size(); ++i) {
    x.push_back(std::log(h[i]));
    y.push_back(std::log(err[i]));
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Grid sizes cells / 2^(levels - 1), ..., cells.
inline std::vector<int> dyadic_levels(int cells, int levels) {
  if (levels < 2) throw PreconditionError("a convergence study needs at least two levels");
  std::vector<int> out;
  for (int k = levels - 1; k >= 0; --k) {
    if (cells % (1 << k) != 0 || (cells >> k) < 8)
      throw PreconditionError("grid cells " + std::to_string(cells) + " do not support " + std::to_string(levels) +
                              " dyadic levels of at least 8 cells");
    out.push_back(cells >> k);
  }
  return out;
}

/// Residuals of the multiplier identity, the gradient pairing identity, Hessian substitution and
/// mantle parameterisation on random smooth fields, at dyadic levels ending at
/// c.cells, on the configured metric (no obstacle).
inline std::vector<ConvergenceRow> convergence_study(const RunConfig& c, int levels, int seeds) {
  RunConfig open = c;
  open.obstacle = "none";
  const std::vector<int> sizes = dyadic_levels(c.cells, levels);
  const MetricModelPtr model = make_metric_model(c);
  std::vector<ConvergenceRow> rows;
  for (int s = 0; s < seeds; ++s) {
    const unsigned seed = c.seed + static_cast<unsigned>(s);
    ConvergenceRow eq{"multiplier_identity", seed, sizes, {}, 0.0, 1.8};
    ConvergenceRow pair{"gradient_pairing", seed, sizes, {}, 0.0, 1.8};
    ConvergenceRow hs{"hessian_substitution", seed, sizes, {}, 0.0, 1.5};
    ConvergenceRow mp{"mantle_parameterization", seed, sizes, {}, 0.0, 1.5};
    const RandomSmoothField rf(seed), px(seed + 1000), py(seed + 2000), pz(seed + 3000);
    const SpaceTimeFunction fn{[&](double t, const Vec3& x) { return rf.u(t, x); },
                               [&](double t, const Vec3& x) { return rf.ut(t, x); },
                               [&](double t, const Vec3& x) { return rf.grad(t, x); }};
    // rho is singular at the apex: keep every stencil of the coarsest level off it.
    const double mantle_rho_min = 1.6 * make_grid(open, sizes.front())->h_min();
    std::vector<double> h;
    for (int cells : sizes) {
      const GridPtr g = make_grid(open, cells);
      const MetricField m(g, model);
      const GeodesicField gf = solve_eikonal(m, c.x0);
      h.push_back(g->h_min());
      const double dt = cfl_dt(m), t = 0.3;
      std::vector<Snapshot> lv;
      for (int k = -1; k <= 1; ++k) {
        const double tk = t + k * dt;
        lv.push_back({tk, ScalarField::sample(g, [&](const Vec3& x) { return rf.u(tk, x); }),
                      ScalarField::sample(g, [&](const Vec3& x) { return rf.ut(tk, x); })});
      }
      eq.error.push_back(identity_residual(lv, gf, m, 1.0).l2);

      const auto f = ScalarField::sample(g, [&](const Vec3& x) { return rf.u(0.3, x); });
      const auto xv = VectorField::sample(g, [&](const Vec3& y) { return Vec3(px.u(0.1, y), py.u(0.2, y), pz.u(0.4, y)); });
      pair.error.push_back(l2_norm(gradient_pairing_residual(f, xv, m).residual, [&](std::size_t p) { return g->stencil_clear(p, 2); }));
      hs.error.push_back(l2_norm(hessian_substitution_residual(f, gf, m), [&](std::size_t p) { return multiplier_node(gf, p); }));
      mp.error.push_back(max_abs(mantle_parameterization_residual(fn, gf, 0.5, mantle_rho_min), [](std::size_t) { return true; }));
    }
    for (ConvergenceRow* r : {&eq, &pair, &hs, &mp}) {
      r->order = fitted_order(h, r->error);
      rows.push_back(std::move(*r));
    }
  }
  return rows;
}

inline void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows,
                                  const std::string& hash) {
  if (rows.empty()) return;
  std::vector<std::string> cols{"identity", "seed"};
  for (int cells : rows.front().cells) cols.push_back("error_" + std::to_string(cells));
  for (const auto& c : {"order", "threshold", "pass"}) cols.emplace_back(c);
  CsvWriter w(path, cols, hash);
  for (const ConvergenceRow& r : rows) {
    std::vector<std::string> cells{r.identity, std::to_string(r.seed)};
    for (double e : r.error) cells.push_back(format_double(e));
    cells.push_back(format_double(r.order));
    cells.push_back(format_double(r.threshold));
    cells.push_back(r.pass() ? "1" : "0");
    w.row(cells);
  }
}

/// Outcome of run_scenario: every enabled check, in a fixed order.
struct RunReport {
  std::string scenario;
  std::string hash;
  std::vector<Check> checks;
  ConeLedger ledger;
  std::optional<BudgetReport> budget;
  std::vector<ConvergenceRow> convergence;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

namespace detail {

/// Ledger rows with t <= t0 (the cone is empty afterwards).
inline std::size_t rows_before_apex(const ConeLedger& l, double t0) {
  std::size_t n = 0;
  while (n < l.size() && l.t[n] <= t0 + 1e-12) ++n;
  return n;
}

inline void write_ledger_csv(const std::string& dir, const ConeLedger& l, const std::string& hash) {
  CsvWriter w(dir + "/ledger.csv", {"t", "E_total", "E_cone", "flux_identity", "flux_direct", "l6_mass", "trace_accum"},
              hash);
  double direct = 0.0, trace = 0.0;
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (k > 0) {
      direct += 0.5 * (l.t[k] - l.t[k - 1]) * (l.mantle[k - 1] + l.mantle[k]);
      if (!l.trace.empty()) trace += 0.5 * (l.t[k] - l.t[k - 1]) * (l.trace[k - 1] + l.trace[k]);
    }
    w.row({l.t[k], l.energy[k], l.cone_energy[k], l.cone_energy[0] - l.cone_energy[k], direct, l.l6_mass[k], trace});
  }
}

}  // namespace detail

/// Executes the configured solver run and diagnostics, writes the CSV reports
/// into out_dir and evaluates every check named in [assert].
inline RunReport run_scenario(const RunConfig& c, const std::string& out_dir, std::ostream* log = nullptr) {
  std::filesystem::create_directories(out_dir);
  auto say = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  auto enabled = [&](const std::string& k) { return c.asserts.count(k) > 0; };
  RunReport rep;
  rep.scenario = c.name;
  rep.hash = c.hash;
  auto check = [&](const std::string& name, double value, double limit, bool pass, const std::string& detail = "") {
    rep.checks.push_back({name, value, limit, pass, detail});
  };

  const GridPtr g = make_grid(c, c.cells);
  auto metric = std::make_shared<const MetricField>(g, make_metric_model(c));
  EikonalOptions eo;
  eo.avoid_obstacle = c.avoid_obstacle;
  say("eikonal from x0 = (" + short_double(c.x0[0]) + ", " + short_double(c.x0[1]) + ", " + short_double(c.x0[2]) + ")");
  const auto gf = std::make_shared<const GeodesicField>(solve_eikonal(*metric, c.x0, eo));
  const ConeSpec cone{c.t0, c.delta, gf};

  if (c.geometry) {
    say("geometry diagnostics");
    const CurvatureReport cr =
        curvature(*metric, [&](std::size_t p) { return g->frame_distance(p) >= 2 && gf->is_valid(p); });
    const ComparisonReport cmp = comparison_check(*gf, *metric, cr.a);
    {
      CsvWriter w(out_dir + "/comparison.csv", {"node", "rho", "lhs", "mid", "rhs", "margin"}, c.hash);
      for (const ComparisonRow& r : cmp.rows)
        w.row({static_cast<double>(r.node), r.rho, r.lower, r.lap, r.upper, r.margin});
    }
    {
      CsvWriter w(out_dir + "/curvature.csv", {"node", "plane", "kappa"}, c.hash);
      for (const CurvatureSample& s : cr.samples) w.row({std::to_string(s.node), s.plane, format_double(s.kappa)});
    }
    const SmallRhoLimits lim = small_rho_limits(*gf, *metric);
    double eik = 0.0;
    for (std::size_t p = 0; p < g->size(); ++p)
      if (gf->is_valid(p)) eik = std::max(eik, std::abs(gf->eikonal_residual[p]));
    {
      CsvWriter w(out_dir + "/geometry.csv", {"quantity", "value"}, c.hash);
      auto kv = [&](const std::string& k, double v) { w.row({k, format_double(v)}); };
      kv("curvature_a", cr.a);
      kv("comparison_checked", static_cast<double>(cmp.checked));
      kv("comparison_violations", static_cast<double>(cmp.violations));
      kv("comparison_worst_margin", cmp.worst_margin);
      kv("comparison_band", cmp.band);
      kv("limit_div_rho_gradg_rho", lim.limit_div);
      for (int i = 0; i < 3; ++i) kv("limit_hess_eig_" + std::to_string(i), lim.limit_hess[i]);
      kv("max_eikonal_residual_valid", eik);
      kv("rho_max", gf->rho_max);
      for (double S : {0.1, 0.2, 0.4}) {
        if (S > gf->rho_max) continue;
        const PolarIntegrals pi = polar_integral_estimates(*gf, S);
        kv("polar_I1_S" + short_double(S), pi.I1);
        kv("polar_I2_S" + short_double(S), pi.I2);
      }
    }
    if (enabled("small_rho")) {
      double dev = std::abs(lim.limit_div - 3.0);
      for (int i = 0; i < 3; ++i) dev = std::max(dev, std::abs(lim.limit_hess[i] - 1.0));
      check("small_rho", dev, c.asserts.at("small_rho"), dev <= c.asserts.at("small_rho"),
            "div limit " + short_double(lim.limit_div));
    }
    if (enabled("comparison"))
      check("comparison", static_cast<double>(cmp.violations), c.asserts.at("comparison"),
            cmp.violations <= c.asserts.at("comparison"), "worst margin " + short_double(cmp.worst_margin));
  }

  if (c.tangency) {
    say("tangency check");
    const TangencyReport t = tangency_check(*gf);
    CsvWriter w(out_dir + "/tangency.csv", {"rho", "normal_component"}, c.hash);
    for (std::size_t i = 0; i < t.rho.size(); ++i) w.row({t.rho[i], t.normal_component[i]});
    if (enabled("tangency_exponent"))
      check("tangency_exponent", t.exponent, c.asserts.at("tangency_exponent"),
            t.exponent >= c.asserts.at("tangency_exponent"), "rho-weighted exponent " + short_double(t.exponent_weighted));
  }

  if (c.data != "none") {
    const InitialData d = make_data(c, g);
    const WaveSolver ws(metric, c.nonlinear);
    const double dt = cfl_dt(*metric) * c.cfl / 0.5;
    say("evolving " + std::to_string(c.cells) + "^3 to t = " + short_double(c.t_end) + " at dt = " + short_double(dt));
    ConeLedger& l = rep.ledger;
    MixedNormSpec nspec = MixedNormSpec::strichartz(c.norm_q);
    if (c.norm_region == "cone") nspec = MixedNormSpec::strichartz(c.norm_q, NormRegion::cone, cone);
    if (c.norm_region == "expanded") nspec = MixedNormSpec::strichartz(c.norm_q, NormRegion::expanded, cone);
    NormSeries ns;
    CsvWriter manifest(out_dir + "/manifest.csv", {"step", "t", "E_total", "E_cone", "l6_mass"}, c.hash);
    auto record = [&](long step, const Snapshot& s) {
      l.record(s, cone, *metric);
      if (c.norms) record_slice(ns, s.u, s.t, nspec);
      manifest.row({static_cast<double>(step), s.t, l.energy.back(), l.cone_energy.back(), l.l6_mass.back()});
    };
    record(0, {0.0, d.f, d.g});
    WaveState s = ws.start(d, dt);
    while (s.t <= c.t_end + 1e-12) {
      WaveState next = ws.step(s);
      if (s.step % c.cadence == 0) record(s.step, snapshot_between(s, next));
      s = std::move(next);
    }
    detail::write_ledger_csv(out_dir, l, c.hash);
    if (c.norms) {
      CsvWriter w(out_dir + "/norms.csv", {"t", "slice_Lq", "running_mixed_norm"}, c.hash);
      const auto run = running_mixed_norm(ns, nspec.p, nspec.q);
      for (std::size_t k = 0; k < ns.size(); ++k) w.row({ns.t[k], std::pow(ns.slice[k], 1.0 / nspec.q), run[k]});
    }

    const double e0 = l.e0;
    const std::size_t n = detail::rows_before_apex(l, c.t0);
    if (enabled("energy_drift"))
      check("energy_drift", l.energy_drift(), c.asserts.at("energy_drift"), l.energy_drift() <= c.asserts.at("energy_drift"));
    if (enabled("cone_monotone") && n >= 2) {
      double rise = 0.0, min_flux = kInf;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        rise = std::max(rise, l.cone_energy[k + 1] - l.cone_energy[k]);
        min_flux = std::min(min_flux, trapezoid(l.t, l.mantle, k, k + 1));
      }
      const double worst = std::max(rise, -min_flux) / e0, tol = c.asserts.at("cone_monotone");
      check("cone_monotone", worst, tol, worst <= tol,
            "max rise " + short_double(rise / e0) + " E0, smallest step flux " + short_double(min_flux / e0) + " E0");
    }
    if (enabled("flux_identity") && n >= 11) {
      double worst = 0.0;
      for (int i = 0; i < 10; ++i) {
        const std::size_t a = (n - 1) * i / 10, b = (n - 1) * (i + 1) / 10;
        worst = std::max(worst, std::abs(flux_direct(l, l.t[a], l.t[b]) - flux_from_identity(l, l.t[a], l.t[b])));
      }
      check("flux_identity", worst / e0, c.asserts.at("flux_identity"), worst / e0 <= c.asserts.at("flux_identity"));
    }
    if (enabled("flux_decay") && n >= 8) {
      // Flux(M_s^T) with T the last row before the apex, as s -> T over the last quarter.
      const std::size_t last = n - 1, first = last - std::max<std::size_t>(4, (n - 1) / 4);
      const double tol = c.asserts.at("flux_decay") * e0;
      double up = 0.0, prev = flux_direct(l, l.t[first], l.t[last]);
      for (std::size_t k = first + 1; k < last; ++k) {
        const double f = flux_direct(l, l.t[k], l.t[last]);
        up = std::max(up, f - prev);
        prev = f;
      }
      const double final_step = std::abs(flux_direct(l, l.t[last - 1], l.t[last]));
      const double worst = std::max(up, final_step) / e0;
      check("flux_decay", worst, c.asserts.at("flux_decay"), worst * e0 <= tol,
            "final one-step flux " + short_double(final_step / e0) + " E0");
    }
    if (c.budget) {
      rep.budget = cone_budget(l, cone);
      CsvWriter w(out_dir + "/budget.csv",
                  {"S", "lhs_l6", "flux_term", "flux_cbrt_term", "s2_e0_term", "bulk_term", "trace_term"}, c.hash);
      for (const BudgetRow& r : rep.budget->rows)
        w.row({r.S, r.lhs_l6, r.flux_term, r.flux_cbrt_term, r.s2_e0_term, r.bulk_term, r.trace_term});
      if (enabled("budget_vanish"))
        check("budget_vanish", rep.budget->final_over_max, c.asserts.at("budget_vanish"),
              rep.budget->shape_ok && rep.budget->final_over_max <= c.asserts.at("budget_vanish"),
              "fitted constant " + short_double(rep.budget->constant) +
                  (rep.budget->shape_ok ? "" : ", shape violation at row " +
                                                   std::to_string(rep.budget->first_shape_violation)));
    }
    if (enabled("l6_decay") && n >= 2) {
      double rise = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) rise = std::max(rise, l.l6_mass[k + 1] - l.l6_mass[k]);
      const double init = l.l6_mass[0], ratio = init > 0.0 ? l.l6_mass[n - 1] / init : 0.0;
      check("l6_decay", ratio, c.asserts.at("l6_decay"), ratio <= c.asserts.at("l6_decay") && rise <= 1e-2 * init,
            "largest step increase " + short_double(init > 0.0 ? rise / init : 0.0) + " of initial");
    }
    if (enabled("trace_finite")) {
      const TraceBound tb = boundary_trace_bound(l);
      check("trace_finite", tb.ratio, c.asserts.at("trace_finite"),
            std::isfinite(tb.ratio) && tb.ratio > 0.0 && tb.ratio <= c.asserts.at("trace_finite"),
            "norm " + short_double(tb.norm));
    }
  }

  if (c.identities) {
    say("identity convergence over " + std::to_string(c.levels) + " levels");
    rep.convergence = convergence_study(c, c.levels, c.identity_seeds);
    write_convergence_csv(out_dir + "/convergence.csv", rep.convergence, c.hash);
    if (enabled("identity_orders")) {
      double shortfall = 0.0;
      std::string worst;
      for (const ConvergenceRow& r : rep.convergence)
        if (r.threshold - r.order > shortfall) {
          shortfall = r.threshold - r.order;
          worst = r.identity + " seed " + std::to_string(r.seed);
        }
      check("identity_orders", shortfall, c.asserts.at("identity_orders"), shortfall <= c.asserts.at("identity_orders"),
            worst.empty() ? "all orders at or above their thresholds" : "largest shortfall: " + worst);
    }
  }

  CsvWriter w(out_dir + "/summary.csv", {"check", "value", "limit", "pass"}, c.hash);
  for (const Check& k : rep.checks) w.row({k.name, format_double(k.value), format_double(k.limit), k.pass ? "1" : "0"});
  return rep;
}

}  // namespace conelab
