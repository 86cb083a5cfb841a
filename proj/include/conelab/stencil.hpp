#pragma once

#include "conelab/field.hpp"

namespace conelab {

/// Which nodes a difference stencil may read.
namespace detail {

inline bool usable(const Grid& g, std::array<int, 3> c, MaskPolicy policy) {
  if (!g.contains(c[0], c[1], c[2])) return false;
  return policy == MaskPolicy::ignore || !g.masked(g.index(c[0], c[1], c[2]));
}

/// d/dx_axis of w at p: central where both neighbours are usable, otherwise
/// one-sided second order, falling back to first order on very thin slivers.
template <class T>
T axis_derivative(const NodeField<T>& w, std::size_t p, int axis, MaskPolicy policy) {
  const Grid& g = w.grid();
  const auto c = g.coords(p);
  const double h = g.h(axis);
  auto at = [&](int off) {
    auto n = c;
    n[axis] += off;
    return n;
  };
  auto val = [&](int off) {
    const auto n = at(off);
    return w[g.index(n[0], n[1], n[2])];
  };
  const bool m1 = usable(g, at(-1), policy), p1 = usable(g, at(1), policy);
  if (m1 && p1) return T((val(1) - val(-1)) / (2.0 * h));
  if (p1 && usable(g, at(2), policy)) return T((-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h));
  if (m1 && usable(g, at(-2), policy)) return T((3.0 * val(0) - 4.0 * val(-1) + val(-2)) / (2.0 * h));
  if (p1) return T((val(1) - val(0)) / h);
  if (m1) return T((val(0) - val(-1)) / h);
  return NodeField<T>::zero();
}

/// Central difference with zero extension: unreadable neighbours count as 0.
template <class T>
T axis_central_zero_ext(const NodeField<T>& w, std::size_t p, int axis) {
  const Grid& g = w.grid();
  const auto c = g.coords(p);
  T acc = NodeField<T>::zero();
  auto n = c;
  n[axis] = c[axis] + 1;
  if (g.contains(n[0], n[1], n[2])) acc += w[g.index(n[0], n[1], n[2])];
  n[axis] = c[axis] - 1;
  if (g.contains(n[0], n[1], n[2])) acc -= w[g.index(n[0], n[1], n[2])];
  return T(acc / (2.0 * g.h(axis)));
}

}  // namespace detail

/// Euclidean gradient: central in the interior, one-sided second order next to
/// the mask and the outer box. Masked nodes get 0 under MaskPolicy::respect.
inline VectorField gradient_fd(const ScalarField& w, MaskPolicy policy = MaskPolicy::respect) {
  const Grid& g = w.grid();
  VectorField out(w.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    if (policy == MaskPolicy::respect && g.masked(p)) return;
    for (int a = 0; a < 3; ++a) out[p][a] = detail::axis_derivative(w, p, a, policy);
  });
  return out;
}

/// Jacobian J(i, a) = d V_i / d x_a with the same stencils as gradient_fd.
inline MatrixField jacobian_fd(const VectorField& v, MaskPolicy policy = MaskPolicy::respect) {
  const Grid& g = v.grid();
  MatrixField out(v.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    if (policy == MaskPolicy::respect && g.masked(p)) return;
    for (int a = 0; a < 3; ++a) out[p].col(a) = detail::axis_derivative(v, p, a, policy);
  });
  return out;
}

inline ScalarField divergence_fd(const VectorField& v, MaskPolicy policy = MaskPolicy::respect) {
  const Grid& g = v.grid();
  ScalarField out(v.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    if (policy == MaskPolicy::respect && g.masked(p)) return;
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += detail::axis_derivative(v, p, a, policy)[a];
    out[p] = s;
  });
  return out;
}

/// Central gradient treating every node outside the box as 0. Paired with
/// divergence_zero_ext it gives the operator D0^T A D0, symmetric and
/// negative semidefinite on fields that vanish on Dirichlet nodes.
inline VectorField gradient_zero_ext(const ScalarField& w) {
  const Grid& g = w.grid();
  VectorField out(w.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    for (int a = 0; a < 3; ++a) out[p][a] = detail::axis_central_zero_ext(w, p, a);
  });
  return out;
}

inline ScalarField divergence_zero_ext(const VectorField& v) {
  const Grid& g = v.grid();
  ScalarField out(v.grid_ptr());
  parallel_for(g.size(), [&](std::size_t p) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += detail::axis_central_zero_ext(v, p, a)[a];
    out[p] = s;
  });
  return out;
}

/// Second derivatives. Compact central stencils where the 3x3x3 block is
/// usable, otherwise the Jacobian of gradient_fd (symmetrised).
inline MatrixField hessian_fd(const ScalarField& w, MaskPolicy policy = MaskPolicy::respect) {
  const Grid& g = w.grid();
  MatrixField out(w.grid_ptr());
  const VectorField grad = gradient_fd(w, policy);
  const std::array<std::size_t, 3> st{g.stride(0), g.stride(1), g.stride(2)};
  parallel_for(g.size(), [&](std::size_t p) {
    if (policy == MaskPolicy::respect && g.masked(p)) return;
    const bool clear = policy == MaskPolicy::ignore ? g.frame_distance(p) >= 1 : g.stencil_clear(p, 1);
    Mat3 hm;
    if (clear) {
      for (int a = 0; a < 3; ++a) {
        const double ha = g.h(a);
        hm(a, a) = (w[p + st[a]] - 2.0 * w[p] + w[p - st[a]]) / (ha * ha);
        for (int b = a + 1; b < 3; ++b) {
          const double v = (w[p + st[a] + st[b]] - w[p + st[a] - st[b]] - w[p - st[a] + st[b]] +
                            w[p - st[a] - st[b]]) /
                           (4.0 * ha * g.h(b));
          hm(a, b) = v;
          hm(b, a) = v;
        }
      }
    } else {
      for (int a = 0; a < 3; ++a) hm.col(a) = detail::axis_derivative(grad, p, a, policy);
      hm = 0.5 * (hm + hm.transpose()).eval();
    }
    out[p] = hm;
  });
  return out;
}

}  // namespace conelab
