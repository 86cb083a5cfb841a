#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "conelab/stencil.hpp"

namespace conelab {

/// Analytic coefficient matrix A(x); the Riemannian metric is g = A^{-1}.
class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual Mat3 A(const Vec3& x) const = 0;
  virtual std::string name() const = 0;
  /// Whether the model is constant in space (flat, zero Christoffels).
  virtual bool constant() const { return false; }
};

class ConstantMetric final : public MetricModel {
 public:
  explicit ConstantMetric(Mat3 a = Mat3::Identity(), std::string name = "identity")
      : a_(std::move(a)), name_(std::move(name)) {}
  static std::shared_ptr<ConstantMetric> identity() { return std::make_shared<ConstantMetric>(); }
  static std::shared_ptr<ConstantMetric> diagonal(const Vec3& d) {
    return std::make_shared<ConstantMetric>(Mat3(d.asDiagonal()), "diagonal");
  }
  static std::shared_ptr<ConstantMetric> scaled(double c) {
    return std::make_shared<ConstantMetric>(Mat3(c * c * Mat3::Identity()), "scaled");
  }
  Mat3 A(const Vec3&) const override { return a_; }
  std::string name() const override { return name_; }
  bool constant() const override { return true; }

 private:
  Mat3 a_;
  std::string name_;
};

/// Septic smoothstep: 1 for r <= r0, 0 for r >= r1, three continuous derivatives.
inline double smooth_cutoff(double r, double r0, double r1) {
  if (r <= r0) return 1.0;
  if (r >= r1) return 0.0;
  const double t = (r - r0) / (r1 - r0);
  const double t4 = t * t * t * t;
  return 1.0 - t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
}

/// Conformally flat metric g = e^{2 phi} delta, i.e. A = e^{-2 phi} I.
class ConformalMetric final : public MetricModel {
 public:
  ConformalMetric(std::function<double(const Vec3&)> phi, std::string name)
      : phi_(std::move(phi)), name_(std::move(name)) {}

  /// phi = amp * sin x1 sin x2 sin x3, optionally times a cutoff of |x| between r0 and r1.
  static std::shared_ptr<ConformalMetric> sine(double amp, double r0 = -1.0, double r1 = -1.0) {
    return std::make_shared<ConformalMetric>(
        [=](const Vec3& x) {
          const double chi = r1 > 0.0 ? smooth_cutoff(x.norm(), r0, r1) : 1.0;
          return chi * amp * std::sin(x[0]) * std::sin(x[1]) * std::sin(x[2]);
        },
        "conformal");
  }
  /// Round metric of constant curvature kappa in stereographic coordinates,
  /// g = 4 / (1 + kappa |x|^2)^2 delta.
  static std::shared_ptr<ConformalMetric> sphere(double kappa) {
    return std::make_shared<ConformalMetric>(
        [=](const Vec3& x) { return std::log(2.0) - std::log1p(kappa * x.squaredNorm()); }, "sphere");
  }
  /// A = s(x) I with s = 1 + eps sin x1.
  static std::shared_ptr<ConformalMetric> scalar_sine(double eps) {
    return std::make_shared<ConformalMetric>(
        [=](const Vec3& x) { return -0.5 * std::log1p(eps * std::sin(x[0])); }, "scalar_sine");
  }

  double phi(const Vec3& x) const { return phi_(x); }
  Mat3 A(const Vec3& x) const override { return std::exp(-2.0 * phi_(x)) * Mat3::Identity(); }
  std::string name() const override { return name_; }

 private:
  std::function<double(const Vec3&)> phi_;
  std::string name_;
};

/// Anisotropic metric with a twisting principal frame:
/// A = (1 - chi) I + chi R^T diag(1, 1 + eps sin(k x1), 1 + eps cos(k x2)) R,
/// with R the rotation about x3 by theta0 sin(k x3) and chi a radial cutoff.
class WavyMetric final : public MetricModel {
 public:
  struct Params {
    double eps = 0.3;
    double k = 2.0;
    double theta0 = 0.5;
    double r0 = 0.6;
    double r1 = 0.95;
  };
  WavyMetric() = default;
  explicit WavyMetric(Params p) : p_(p) {}

  Mat3 A(const Vec3& x) const override {
    const double chi = smooth_cutoff(x.norm(), p_.r0, p_.r1);
    if (chi == 0.0) return Mat3::Identity();
    const double th = p_.theta0 * std::sin(p_.k * x[2]);
    Mat3 r = Eigen::AngleAxisd(th, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 d(1.0, 1.0 + p_.eps * std::sin(p_.k * x[0]), 1.0 + p_.eps * std::cos(p_.k * x[1]));
    const Mat3 inner = r.transpose() * d.asDiagonal() * r;
    return (1.0 - chi) * Mat3::Identity() + chi * inner;
  }
  std::string name() const override { return "wavy"; }
  const Params& params() const { return p_; }

 private:
  Params p_{};
};

using MetricModelPtr = std::shared_ptr<const MetricModel>;

/// Symmetric positive-definite coefficient field sampled at every node of the
/// box (the obstacle is filled with the same smooth metric).
class MetricField {
 public:
  MetricField(GridPtr grid, MetricModelPtr model) : model_(std::move(model)), a_(grid), g_(grid), det_g_(grid) {
    const Grid& gr = *grid;
    parallel_for(gr.size(), [&](std::size_t p) {
      const Mat3 a = model_->A(gr.position(p));
      a_[p] = 0.5 * (a + a.transpose());
      g_[p] = a_[p].inverse();
      det_g_[p] = g_[p].determinant();
    });
    const auto bounds = bounds_over([](std::size_t) { return true; });
    c1_ = bounds.first;
    c2_ = bounds.second;
  }

  const Grid& grid() const { return a_.grid(); }
  const GridPtr& grid_ptr() const { return a_.grid_ptr(); }
  const MatrixField& A() const { return a_; }
  const MatrixField& g() const { return g_; }
  /// det(g_ij) per node.
  const ScalarField& G() const { return det_g_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  const MetricModel& model() const { return *model_; }
  const MetricModelPtr& model_ptr() const { return model_; }
  bool constant() const { return model_->constant(); }

  template <class Region>
  std::pair<double, double> bounds_over(Region&& region) const;

 private:
  MetricModelPtr model_;
  MatrixField a_, g_;
  ScalarField det_g_;
  double c1_ = 0.0, c2_ = 0.0;
};

/// Smallest and largest eigenvalue of A over region nodes.
template <class Region>
std::pair<double, double> ellipticity_bounds(const MatrixField& a, Region&& region) {
  const Grid& g = a.grid();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!region(p)) continue;
    const Mat3& m = a[p];
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
      throw PreconditionError("coefficient matrix is not symmetric at node " + std::to_string(p));
    Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
    const Vec3 ev = es.eigenvalues();
    if (!(ev[0] > 0.0))
      throw PreconditionError("coefficient matrix is not positive definite at node " + std::to_string(p));
    lo = std::min(lo, ev[0]);
    hi = std::max(hi, ev[2]);
  }
  if (lo > hi) throw PreconditionError("ellipticity bounds over an empty region");
  return {lo, hi};
}

inline std::pair<double, double> ellipticity_bounds(const MatrixField& a) {
  return ellipticity_bounds(a, [](std::size_t) { return true; });
}

template <class Region>
std::pair<double, double> MetricField::bounds_over(Region&& region) const {
  return ellipticity_bounds(a_, region);
}

/// <X, Y>_g = <A^{-1} X, Y> at a fluid node.
inline double g_inner(const MetricField& m, const Vec3& x, const Vec3& y, std::size_t node) {
  if (m.grid().masked(node)) throw PreconditionError("g_inner at a masked node");
  return x.dot(m.g()[node] * y);
}

/// Riemannian gradient A * grad w.
inline VectorField g_gradient(const ScalarField& w, const MetricField& m,
                              MaskPolicy policy = MaskPolicy::respect) {
  if (w.grid_ptr() != m.grid_ptr()) throw GridMismatch("scalar field and metric on different grids");
  VectorField grad = gradient_fd(w, policy);
  parallel_for(grad.size(), [&](std::size_t p) { grad[p] = m.A()[p] * grad[p]; });
  return grad;
}

/// |grad_g w|_g^2 = a^{ij} w_i w_j.
inline ScalarField g_norm2(const ScalarField& w, const MetricField& m, MaskPolicy policy = MaskPolicy::respect) {
  if (w.grid_ptr() != m.grid_ptr()) throw GridMismatch("scalar field and metric on different grids");
  const VectorField grad = gradient_fd(w, policy);
  return map_nodes<double>(w.grid_ptr(), [&](std::size_t p) { return grad[p].dot(m.A()[p] * grad[p]); });
}

}  // namespace conelab
