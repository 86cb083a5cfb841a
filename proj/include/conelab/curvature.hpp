#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "conelab/metric.hpp"

namespace conelab {

/// gamma[k](i, j) = Gamma^k_{ij}.
using Christoffel = std::array<Mat3, 3>;

/// riemann[l][k](i, j) = R^l_{kij}.
using Riemann = std::array<std::array<Mat3, 3>, 3>;

/// Christoffel symbols at node p from second-order differences of the sampled g.
inline Christoffel christoffel_at(const MetricField& m, std::size_t p) {
  std::array<Mat3, 3> dg;
  for (int a = 0; a < 3; ++a) dg[a] = detail::axis_derivative(m.g(), p, a, MaskPolicy::ignore);
  const Mat3& ainv = m.A()[p];
  Christoffel gam;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += ainv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gam[k](i, j) = 0.5 * s;
        gam[k](j, i) = 0.5 * s;
      }
  }
  return gam;
}

/// R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik} + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}.
/// Needs the node and its six axis neighbours at least one layer off the frame.
inline Riemann riemann_at(const MetricField& m, std::size_t p) {
  const Grid& g = m.grid();
  if (g.frame_distance(p) < 2) throw PreconditionError("curvature stencil leaves the grid");
  const Christoffel gam = christoffel_at(m, p);
  std::array<Christoffel, 3> dgam;
  for (int a = 0; a < 3; ++a) {
    const Christoffel up = christoffel_at(m, p + g.stride(a));
    const Christoffel dn = christoffel_at(m, p - g.stride(a));
    for (int k = 0; k < 3; ++k) dgam[a][k] = (up[k] - dn[k]) / (2.0 * g.h(a));
  }
  Riemann r;
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double v = dgam[i][l](j, k) - dgam[j][l](i, k);
          for (int q = 0; q < 3; ++q) v += gam[l](i, q) * gam[q](j, k) - gam[l](j, q) * gam[q](i, k);
          r[l][k](i, j) = v;
        }
  return r;
}

/// Sectional curvature R(X, Y, Y, X) / (|X|^2 |Y|^2 - <X, Y>^2), all in the metric gm.
inline double sectional(const Riemann& r, const Mat3& gm, const Vec3& x, const Vec3& y) {
  double num = 0.0;
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 3; ++k) {
      // lowered index: R_{lkij} = g_{ln} R^n_{kij}
      Mat3 low = Mat3::Zero();
      for (int n = 0; n < 3; ++n) low += gm(l, n) * r[n][k];
      num += x[l] * y[k] * x.dot(low * y);
    }
  const double xx = x.dot(gm * x), yy = y.dot(gm * y), xy = x.dot(gm * y);
  return num / (xx * yy - xy * xy);
}

struct CurvatureSample {
  std::size_t node;
  std::string plane;
  double kappa;
};

struct CurvatureReport {
  std::vector<CurvatureSample> samples;
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  /// sqrt(max |kappa|) over the samples.
  double a = 0.0;
  /// One representative Christoffel and Riemann sample (first region node).
  Christoffel christoffel_sample{};
  Riemann riemann_sample{};
};

/// Sectional curvatures on the three coordinate planes and `random_planes`
/// random planes per region node.
template <class Region>
CurvatureReport curvature(const MetricField& m, Region&& region, int random_planes = 2,
                          unsigned seed = 1) {
  const Grid& g = m.grid();
  std::vector<std::size_t> nodes;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (region(p)) nodes.push_back(p);
  if (nodes.empty()) throw PreconditionError("curvature: empty region");
  for (auto p : nodes)
    if (!g.stencil_clear(p, 2)) throw PreconditionError("curvature: region touches the mask or the frame");

  // Random planes drawn up front so results do not depend on thread scheduling.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<std::pair<Vec3, Vec3>> planes{{Vec3::UnitX(), Vec3::UnitY()},
                                            {Vec3::UnitX(), Vec3::UnitZ()},
                                            {Vec3::UnitY(), Vec3::UnitZ()}};
  const std::vector<std::string> labels{"x1x2", "x1x3", "x2x3"};
  std::vector<std::vector<std::pair<Vec3, Vec3>>> random(nodes.size());
  for (auto& per_node : random)
    for (int r = 0; r < random_planes; ++r) {
      Vec3 x(nd(rng), nd(rng), nd(rng)), y(nd(rng), nd(rng), nd(rng));
      per_node.emplace_back(x, y);
    }

  const std::size_t per = planes.size() + static_cast<std::size_t>(random_planes);
  CurvatureReport rep;
  rep.samples.resize(nodes.size() * per);
  parallel_for(nodes.size(), [&](std::size_t n) {
    const std::size_t p = nodes[n];
    const Riemann r = riemann_at(m, p);
    const Mat3& gm = m.g()[p];
    for (std::size_t i = 0; i < planes.size(); ++i)
      rep.samples[n * per + i] = {p, labels[i], sectional(r, gm, planes[i].first, planes[i].second)};
    for (int i = 0; i < random_planes; ++i) {
      const auto& pl = random[n][static_cast<std::size_t>(i)];
      rep.samples[n * per + planes.size() + i] = {p, "random", sectional(r, gm, pl.first, pl.second)};
    }
  });
  rep.kappa_min = rep.kappa_max = rep.samples.front().kappa;
  for (const auto& s : rep.samples) {
    rep.kappa_min = std::min(rep.kappa_min, s.kappa);
    rep.kappa_max = std::max(rep.kappa_max, s.kappa);
  }
  rep.a = std::sqrt(std::max(std::abs(rep.kappa_min), std::abs(rep.kappa_max)));
  rep.christoffel_sample = christoffel_at(m, nodes.front());
  rep.riemann_sample = riemann_at(m, nodes.front());
  return rep;
}

/// Covariant derivative (nabla_Y X)^k = Y^i (d_i X^k + Gamma^k_{ij} X^j), given
/// the Jacobian J(k, i) = d_i X^k at the node.
inline Vec3 covariant_derivative(const Christoffel& gam, const Mat3& jac, const Vec3& x, const Vec3& y) {
  Vec3 out = jac * y;
  for (int k = 0; k < 3; ++k) out[k] += y.dot(gam[k] * x);
  return out;
}

}  // namespace conelab
