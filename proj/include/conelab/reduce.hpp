#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "conelab/field.hpp"

namespace conelab {

/// Exact fixed-point accumulator for sums of doubles.
///
/// Every finite double is an integer multiple of 2^-1074, so the running sum is
/// held exactly as a signed integer in 32-bit limbs stored in int64 slots; the
/// spare high bits absorb carries between normalisations. The result is
/// rounded once, on conversion, so sums are independent of order and of how
/// the work was split between threads.
class ExactAccumulator {
 public:
  static constexpr int kLimbs = 70;
  static constexpr int kMinExp = -1074;

  void add(double x) {
    if (x == 0.0) return;
    if (!std::isfinite(x)) {
      nonfinite_ = true;
      return;
    }
    int e = 0;
    const double frac = std::frexp(std::abs(x), &e);  // |x| = frac * 2^e, frac in [0.5, 1)
    // |x| = m * 2^(e - 53) with m a 53-bit integer (exact for normals and subnormals)
    int shift_exp = e - 53;
    auto m = static_cast<std::uint64_t>(std::ldexp(frac, 53));
    if (shift_exp < kMinExp) {
      m >>= (kMinExp - shift_exp);
      shift_exp = kMinExp;
    }
    const int offset = shift_exp - kMinExp;
    const int limb = offset / 32;
    const unsigned __int128 wide = static_cast<unsigned __int128>(m) << (offset % 32);
    const std::int64_t sign = x < 0.0 ? -1 : 1;
    for (int k = 0; k < 3; ++k) {
      const auto part = static_cast<std::int64_t>((wide >> (32 * k)) & 0xffffffffu);
      limbs_[limb + k] += sign * part;
    }
    if (++pending_ >= (1u << 30)) normalize();
  }

  void merge(const ExactAccumulator& other) {
    ExactAccumulator o = other;
    o.normalize();
    normalize();
    for (int i = 0; i < kLimbs; ++i) limbs_[i] += o.limbs_[i];
    nonfinite_ = nonfinite_ || o.nonfinite_;
    pending_ = 1;
    normalize();
  }

  /// Correctly rounded (to nearest) value of the exact sum.
  double value() const {
    if (nonfinite_) return std::numeric_limits<double>::quiet_NaN();
    ExactAccumulator c = *this;
    c.normalize();
    bool negative = c.limbs_[kLimbs - 1] < 0;
    if (negative) {
      for (auto& l : c.limbs_) l = -l;
      c.normalize();
    }
    int top = kLimbs - 1;
    while (top >= 0 && c.limbs_[top] == 0) --top;
    if (top < 0) return 0.0;
    unsigned __int128 mant = 0;
    int low = top - 2;
    for (int i = top; i >= std::max(low, 0); --i)
      mant = (mant << 32) | static_cast<std::uint64_t>(c.limbs_[i]);
    if (low < 0) {
      mant <<= 32 * (-low);
    }
    bool sticky = false;
    for (int i = 0; i < low; ++i) sticky = sticky || c.limbs_[i] != 0;
    if (sticky) mant |= 1;
    const double v = std::ldexp(static_cast<double>(mant), 32 * low + kMinExp);
    return negative ? -v : v;
  }

  bool operator==(const ExactAccumulator& o) const {
    ExactAccumulator a = *this, b = o;
    a.normalize();
    b.normalize();
    return a.limbs_ == b.limbs_ && a.nonfinite_ == b.nonfinite_;
  }

 private:
  void normalize() {
    std::int64_t carry = 0;
    for (int i = 0; i < kLimbs - 1; ++i) {
      const std::int64_t v = limbs_[i] + carry;
      carry = v >> 32;  // arithmetic shift: floor division
      limbs_[i] = v - (carry << 32);
    }
    limbs_[kLimbs - 1] += carry;
    pending_ = 0;
  }

  std::array<std::int64_t, kLimbs> limbs_{};
  std::uint32_t pending_ = 0;
  bool nonfinite_ = false;
};

/// Exact sum of fn(p) over nodes p with region(p), parallel over node ranges.
template <class Fn, class Region>
ExactAccumulator accumulate(std::size_t n, Fn&& fn, Region&& region) {
  ExactAccumulator total;
#pragma omp parallel
  {
    ExactAccumulator local;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t q = 0; q < count; ++q) {
      const auto p = static_cast<std::size_t>(q);
      if (region(p)) local.add(fn(p));
    }
#pragma omp critical(conelab_accumulate)
    total.merge(local);
  }
  return total;
}

/// Sum of w * cell volume over the region nodes; full cell volume per node.
template <class Region>
double integrate(const ScalarField& w, Region&& region) {
  const auto acc = accumulate(w.size(), [&](std::size_t p) { return w[p]; }, region);
  return acc.value() * w.grid().cell_volume();
}

/// Integral over all fluid nodes.
inline double integrate(const ScalarField& w) {
  const Grid& g = w.grid();
  return integrate(w, [&](std::size_t p) { return g.fluid(p); });
}

/// Integral of fn(p) over the region without materialising a field.
template <class Fn, class Region>
double integrate_nodes(const Grid& g, Fn&& fn, Region&& region) {
  return accumulate(g.size(), fn, region).value() * g.cell_volume();
}

inline double exact_sum(const std::vector<double>& xs) {
  ExactAccumulator acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace conelab
