#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "conelab/energy.hpp"

namespace conelab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Time exponent paired with space exponent q: infinity at q = 6, else 2q / (q - 6).
inline double strichartz_pair(double q) {
  if (!(q >= 6.0)) throw PreconditionError("Strichartz pairs need q >= 6, got " + std::to_string(q));
  return q == 6.0 ? kInf : 2.0 * q / (q - 6.0);
}

enum class NormRegion {
  strip,     // every fluid node
  cone,      // rho <= t0 - t
  expanded,  // rho <= delta + t0 - t
};

/// L_t^p L_x^q over a region that may shrink in time.
struct MixedNormSpec {
  double p = kInf;
  double q = 6.0;
  NormRegion region = NormRegion::strip;
  ConeSpec cone;  // apex and delta for the cone regions

  void validate() const {
    if (!(q >= 1.0) || !std::isfinite(q)) throw PreconditionError("space exponent must lie in [1, inf)");
    if (!(p > 0.0)) throw PreconditionError("time exponent must be positive");
    if (region != NormRegion::strip && !cone.geodesic) throw PreconditionError("cone region needs a geodesic field");
    if (region == NormRegion::expanded && !(cone.delta > 0.0))
      throw PreconditionError("expanded cone needs delta > 0");
  }

  bool contains(const Grid& g, std::size_t node, double t) const {
    if (!g.fluid(node)) return false;
    if (region == NormRegion::strip) return true;
    const double r = cone.geodesic->rho[node];
    const double radius = cone.t0 - t + (region == NormRegion::expanded ? cone.delta : 0.0);
    return std::isfinite(r) && r <= radius;
  }

  static MixedNormSpec strichartz(double q, NormRegion region = NormRegion::strip, ConeSpec cone = {}) {
    return {strichartz_pair(q), q, region, std::move(cone)};
  }
};

/// Per-slice integrals int_{region(t)} |u|^q dx.
struct NormSeries {
  std::vector<double> t;
  std::vector<double> slice;
  std::vector<std::size_t> nodes;  // region size per slice

  std::size_t size() const { return t.size(); }
};

template <class Region>
double slice_integral(const ScalarField& u, double q, Region&& region) {
  return integrate_nodes(u.grid(), [&](std::size_t p) { return std::pow(std::abs(u[p]), q); }, region);
}

inline void record_slice(NormSeries& s, const ScalarField& u, double t, const MixedNormSpec& spec) {
  spec.validate();
  if (spec.region != NormRegion::strip && u.grid_ptr() != spec.cone.geodesic->rho.grid_ptr())
    throw GridMismatch("field and cone on different grids");
  if (!s.t.empty() && !(t > s.t.back())) throw PreconditionError("slice times must increase");
  const Grid& g = u.grid();
  auto in = [&](std::size_t p) { return spec.contains(g, p, t); };
  std::size_t count = 0;
  for (std::size_t p = 0; p < g.size(); ++p) count += in(p);
  s.t.push_back(t);
  s.slice.push_back(slice_integral(u, spec.q, in));
  s.nodes.push_back(count);
}

/// Running (int_{t_0}^{t_k} ||u||_q^p dt)^{1/p}, trapezoid in time; for p = inf
/// the running max of ||u||_q.
inline std::vector<double> running_mixed_norm(const NormSeries& s, double p, double q) {
  if (s.t.empty()) throw PreconditionError("empty norm series");
  std::size_t total = 0;
  for (std::size_t n : s.nodes) total += n;
  if (total == 0) throw PreconditionError("norm region is empty at every slice");
  std::vector<double> out(s.size());
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) out[k] = m = std::max(m, std::pow(s.slice[k], 1.0 / q));
    return out;
  }
  ExactAccumulator acc;
  out[0] = 0.0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    acc.add(0.5 * (s.t[k] - s.t[k - 1]) * (std::pow(s.slice[k - 1], p / q) + std::pow(s.slice[k], p / q)));
    out[k] = std::pow(acc.value(), 1.0 / p);
  }
  return out;
}

inline double mixed_norm(const NormSeries& s, double p, double q) {
  if (!std::isinf(p) && s.size() < 2) throw PreconditionError("finite time exponent needs at least two slices");
  return running_mixed_norm(s, p, q).back();
}

inline double mixed_norm(const NormSeries& s, const MixedNormSpec& spec) { return mixed_norm(s, spec.p, spec.q); }

/// Mixed norm of a sequence of snapshots (u only).
inline double mixed_norm(const std::vector<Snapshot>& run, const MixedNormSpec& spec) {
  NormSeries s;
  for (const Snapshot& snap : run) record_slice(s, snap.u, snap.t, spec);
  return mixed_norm(s, spec);
}

/// Hoelder interpolation bound for 6 < q < q1:
/// ||u||_{L^p L^q} <= ||u||_{L^inf L^6}^{1 - theta} ||u||_{L^p1 L^q1}^theta with
/// 1/q = (1 - theta)/6 + theta/q1 and p = p1 / theta.
inline double interpolation_bound(double q, double q1, double energy_norm, double upper_norm) {
  if (!(6.0 < q && q < q1)) throw PreconditionError("interpolation needs 6 < q < q1");
  const double theta = (1.0 / 6.0 - 1.0 / q) / (1.0 / 6.0 - 1.0 / q1);
  return std::pow(energy_norm, 1.0 - theta) * std::pow(upper_norm, theta);
}

/// Both sides of the linear Strichartz estimate on one run.
struct StrichartzRatio {
  double lhs = 0.0;        // ||u||_{L^p L^q} over the strip
  double grad_f = 0.0;     // (int |grad f|^2)^{1/2}, Euclidean gradient
  double g_l2 = 0.0;       // ||g||_{L^2}
  double forcing = 0.0;    // ||F||_{L^1 L^2}
  double ratio = 0.0;
  NormSeries series;
};

using ForcingFn = std::function<ScalarField(double)>;

/// Runs the linear equation u_tt - div(A grad u) = F on [0, T] at time step dt and
/// divides the strip norm L^{pair(q)} L^q by the data norm.
inline StrichartzRatio strichartz_ratio(std::shared_ptr<const MetricField> metric, const InitialData& data,
                                        const ForcingFn& forcing, double q, double T, double dt) {
  if (!(T > 0.0)) throw PreconditionError("time window must be positive");
  const MixedNormSpec spec = MixedNormSpec::strichartz(q);
  const Grid& g = metric->grid();
  StrichartzRatio r;
  auto l2 = [&](const ScalarField& w) {
    return std::sqrt(integrate_nodes(g, [&](std::size_t p) { return w[p] * w[p]; },
                                     [&](std::size_t p) { return g.fluid(p); }));
  };
  const VectorField df = gradient_zero_ext(data.f);
  r.grad_f = std::sqrt(integrate_nodes(g, [&](std::size_t p) { return df[p].squaredNorm(); },
                                       [&](std::size_t p) { return g.fluid(p); }));
  r.g_l2 = l2(data.g);

  const WaveSolver solver(metric, false);
  const long steps = std::lround(T / dt);
  ScalarField f_now = forcing ? forcing(0.0) : ScalarField();
  const ScalarField* fp = forcing ? &f_now : nullptr;
  std::vector<double> ft, fnorm;
  if (forcing) {
    ft.push_back(0.0);
    fnorm.push_back(l2(f_now));
  }
  WaveState s = solver.start(data, dt, fp);
  record_slice(r.series, s.u_prev, 0.0, spec);
  record_slice(r.series, s.u_curr, s.t, spec);
  for (long n = 1; n < steps; ++n) {
    if (forcing) {
      f_now = forcing(s.t);
      ft.push_back(s.t);
      fnorm.push_back(l2(f_now));
    }
    s = solver.step(s, fp);
    record_slice(r.series, s.u_curr, s.t, spec);
  }
  if (forcing && ft.size() > 1) r.forcing = trapezoid(ft, fnorm, 0, ft.size() - 1);
  r.lhs = mixed_norm(r.series, spec);
  const double den = r.grad_f + r.g_l2 + r.forcing;
  if (!(den > 0.0)) throw PreconditionError("zero data and forcing: the ratio is 0/0");
  r.ratio = r.lhs / den;
  return r;
}

/// Raised when eps is not below 2^{-gamma} C0^{1 - gamma}.
class BootstrapThresholdError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

enum class BootstrapOutcome {
  pass,                // hypothesis holds and max y < 2 C0
  hypothesis_fails,    // y > C0 + eps y^gamma somewhere on the interpolant
  conclusion_fails,    // hypothesis holds but y >= 2 C0 (a counterexample)
};

struct BootstrapVerdict {
  BootstrapOutcome outcome = BootstrapOutcome::pass;
  std::size_t witness = 0;  // offending sample (for a crossing, the segment's left end)
  double max_y = 0.0;
  double lower_root = 0.0;  // y1 in (C0, 2 C0)
  double upper_root = kInf; // y2 > 2 C0 (inf when eps = 0)
  bool pass() const { return outcome == BootstrapOutcome::pass; }
};

inline double bootstrap_threshold(double c0, double gamma) { return std::pow(2.0, -gamma) * std::pow(c0, 1.0 - gamma); }

/// Continuity argument on a sampled series y(t_k), read as its piecewise-linear
/// interpolant. The set where y > C0 + eps y^gamma is the open gap (y1, y2)
/// between the two roots of C0 + eps x^gamma - x, so the hypothesis fails when a
/// sample lies in the gap or a segment jumps across it.
inline BootstrapVerdict bootstrap_check(const std::vector<double>& t, const std::vector<double>& y, double c0,
                                        double gamma, double eps) {
  if (t.size() != y.size() || t.empty()) throw PreconditionError("bootstrap series needs matching nonempty t and y");
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw PreconditionError("C0 must be positive and finite");
  if (!(gamma > 1.0)) throw PreconditionError("gamma must exceed 1");
  if (!(eps >= 0.0)) throw PreconditionError("eps must be nonnegative");
  if (!(eps < bootstrap_threshold(c0, gamma)))
    throw BootstrapThresholdError("eps = " + std::to_string(eps) + " is not below 2^-gamma C0^(1-gamma) = " +
                                  std::to_string(bootstrap_threshold(c0, gamma)));
  if (y.front() != 0.0) throw PreconditionError("bootstrap series must start at y(a) = 0");
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!(y[k] >= 0.0) || !std::isfinite(y[k])) throw PreconditionError("bootstrap series must be finite and >= 0");
    if (k > 0 && !(t[k] > t[k - 1])) throw PreconditionError("bootstrap times must increase");
  }

  BootstrapVerdict v;
  auto phi = [&](double x) { return c0 + eps * std::pow(x, gamma) - x; };
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  auto lo = boost::math::tools::bisect(phi, c0, 2.0 * c0, tol, iters);
  v.lower_root = 0.5 * (lo.first + lo.second);
  if (eps > 0.0) {
    double hi = 4.0 * c0;
    while (phi(hi) <= 0.0) hi *= 2.0;
    iters = 200;
    auto up = boost::math::tools::bisect(phi, 2.0 * c0, hi, tol, iters);
    v.upper_root = 0.5 * (up.first + up.second);
  }
  auto violates = [&](double x) { return x > c0 + eps * std::pow(x, gamma); };

  for (std::size_t k = 0; k < y.size(); ++k) {
    v.max_y = std::max(v.max_y, y[k]);
    const bool crosses = k + 1 < y.size() && std::min(y[k], y[k + 1]) <= v.lower_root &&
                         std::max(y[k], y[k + 1]) >= v.upper_root;
    if (v.outcome == BootstrapOutcome::pass && (violates(y[k]) || crosses)) {
      v.outcome = BootstrapOutcome::hypothesis_fails;
      v.witness = k;
    }
  }
  if (v.outcome == BootstrapOutcome::pass) {
    for (std::size_t k = 0; k < y.size(); ++k)
      if (y[k] >= 2.0 * c0) {
        v.outcome = BootstrapOutcome::conclusion_fails;
        v.witness = k;
        break;
      }
  }
  return v;
}

}  // namespace conelab
