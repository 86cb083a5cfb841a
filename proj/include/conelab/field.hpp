#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "conelab/grid.hpp"

namespace conelab {

/// Per-node values of type T on a shared Grid.
template <class T>
class NodeField {
 public:
  NodeField() = default;
  explicit NodeField(GridPtr grid, const T& fill = zero())
      : grid_(std::move(grid)), values_(grid_->size(), fill) {}

  /// Samples fn(x) at every node (masked nodes included).
  template <class Fn>
  static NodeField sample(GridPtr grid, Fn&& fn) {
    NodeField out(grid);
    const Grid& g = *out.grid_;
    parallel_for(g.size(), [&](std::size_t p) { out.values_[p] = fn(g.position(p)); });
    return out;
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  T& operator[](std::size_t p) { return values_[p]; }
  const T& operator[](std::size_t p) const { return values_[p]; }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }

  static T zero() {
    if constexpr (std::is_arithmetic_v<T>) {
      return T{0};
    } else {
      return T::Zero();
    }
  }

 private:
  GridPtr grid_;
  std::vector<T> values_;
};

using ScalarField = NodeField<double>;
using VectorField = NodeField<Vec3>;
using MatrixField = NodeField<Mat3>;

template <class A, class B>
void require_same_grid(const NodeField<A>& a, const NodeField<B>& b) {
  if (a.grid_ptr() != b.grid_ptr()) throw GridMismatch("fields live on different grids");
}

/// Node-wise map of one or more fields into a new field on the same grid.
template <class Out, class Fn>
NodeField<Out> map_nodes(const GridPtr& grid, Fn&& fn) {
  NodeField<Out> out(grid);
  parallel_for(grid->size(), [&](std::size_t p) { out[p] = fn(p); });
  return out;
}

inline double max_abs(const ScalarField& w, const std::function<bool(std::size_t)>& region) {
  double m = 0.0;
  for (std::size_t p = 0; p < w.size(); ++p)
    if (region(p)) m = std::max(m, std::abs(w[p]));
  return m;
}

enum class MaskPolicy {
  respect,  // masked nodes are unavailable; stencils go one-sided next to the obstacle
  ignore,   // every box node is available (fields defined through the obstacle)
};

/// Trilinear interpolation of a node field at x. Returns false if x lies
/// outside the box or, under MaskPolicy::respect, any of the eight surrounding
/// nodes is masked.
template <class T>
bool interpolate(const NodeField<T>& w, const Vec3& x, T& value, MaskPolicy policy = MaskPolicy::respect) {
  const Grid& g = w.grid();
  std::array<int, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double s = (x[a] - g.origin()[a]) / g.h(a);
    if (s < 0.0 || s > g.cells()[a]) return false;
    base[a] = std::min(static_cast<int>(std::floor(s)), g.cells()[a] - 1);
    frac[a] = s - base[a];
  }
  T acc = NodeField<T>::zero();
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    const std::size_t q = g.index(base[0] + di, base[1] + dj, base[2] + dk);
    if (policy == MaskPolicy::respect && g.masked(q)) return false;
    const double wgt = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                       (dk ? frac[2] : 1.0 - frac[2]);
    acc += wgt * w[q];
  }
  value = acc;
  return true;
}

}  // namespace conelab
