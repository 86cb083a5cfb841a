#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "conelab/core.hpp"

namespace conelab {

/// Random cubic polynomial in (t, x1, x2, x3) times a wide polynomial cutoff,
/// with exact time derivative and spatial gradient. Not a solution of anything.
struct RandomSmoothField {
  struct Term {
    double c;
    std::array<int, 4> e;  // exponents of t, x1, x2, x3
  };
  std::vector<Term> terms;
  Vec3 center = Vec3::Zero();
  double radius = 1.5;
  int power = 4;
  double scale = 0.5;

  explicit RandomSmoothField(unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; a + b < 4; ++b)
        for (int c = 0; a + b + c < 4; ++c)
          for (int d = 0; a + b + c + d < 4; ++d) terms.push_back({coef(rng), {a, b, c, d}});
    center = Vec3(0.1 * coef(rng), 0.1 * coef(rng), 0.1 * coef(rng));
  }

  /// Polynomial value (k < 0), d/dt (k = 0) or d/dx_k (k = 1..3).
  double poly(double t, const Vec3& x, int k = -1) const {
    const std::array<double, 4> v{t, x[0], x[1], x[2]};
    double out = 0.0;
    for (const Term& term : terms) {
      double m = term.c;
      for (int i = 0; i < 4; ++i) {
        int e = term.e[i];
        if (i == k) {
          if (e == 0) {
            m = 0.0;
            break;
          }
          m *= e;
          --e;
        }
        m *= std::pow(v[i], e);
      }
      out += m;
    }
    return out;
  }
  double cut(const Vec3& x) const {
    const double q = (x - center).squaredNorm() / (radius * radius);
    return q < 1.0 ? std::pow(1.0 - q, power) : 0.0;
  }
  Vec3 dcut(const Vec3& x) const {
    const double q = (x - center).squaredNorm() / (radius * radius);
    if (q >= 1.0) return Vec3::Zero();
    return -2.0 * power * std::pow(1.0 - q, power - 1) / (radius * radius) * (x - center);
  }

  double u(double t, const Vec3& x) const { return scale * poly(t, x) * cut(x); }
  double ut(double t, const Vec3& x) const { return scale * poly(t, x, 0) * cut(x); }
  Vec3 grad(double t, const Vec3& x) const {
    const Vec3 dp(poly(t, x, 1), poly(t, x, 2), poly(t, x, 3));
    return scale * (dp * cut(x) + poly(t, x) * dcut(x));
  }
};

}  // namespace conelab
