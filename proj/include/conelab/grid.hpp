#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "conelab/core.hpp"

namespace conelab {

/// Inside/outside description of a compact obstacle.
///
/// level(x) > 0 in the fluid domain and < 0 inside the obstacle; near the
/// surface it behaves like a signed distance.
class Obstacle {
 public:
  virtual ~Obstacle() = default;
  virtual double level(const Vec3& x) const = 0;
  /// Unit normal at the surface point closest to x, pointing into the fluid.
  virtual Vec3 normal(const Vec3& x) const = 0;
  virtual std::string describe() const = 0;
};

class SphereObstacle final : public Obstacle {
 public:
  SphereObstacle(Vec3 center, double radius) : center_(center), radius_(radius) {
    if (!(radius > 0.0)) throw PreconditionError("sphere obstacle radius must be positive");
  }
  double level(const Vec3& x) const override { return (x - center_).norm() - radius_; }
  Vec3 normal(const Vec3& x) const override {
    Vec3 d = x - center_;
    const double n = d.norm();
    return n > 0.0 ? Vec3(d / n) : Vec3::UnitX();
  }
  std::string describe() const override { return "sphere"; }
  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  Vec3 center_;
  double radius_;
};

/// Obstacle filling the half space {(x - point) . normal < 0}; a flat face.
class HalfSpaceObstacle final : public Obstacle {
 public:
  HalfSpaceObstacle(Vec3 point, Vec3 normal) : point_(point), normal_(normal.normalized()) {}
  double level(const Vec3& x) const override { return (x - point_).dot(normal_); }
  Vec3 normal(const Vec3&) const override { return normal_; }
  std::string describe() const override { return "halfspace"; }

 private:
  Vec3 point_;
  Vec3 normal_;
};

enum class NodeKind : std::uint8_t {
  interior,  // fluid node, free unknown of the wave solver
  boundary,  // fluid node with a masked node in its 3x3x3 neighbourhood (discrete obstacle surface)
  frame,     // fluid node on the outer box
  masked,    // inside the obstacle
};

/// Uniform Cartesian node grid over a box, with optional staircase obstacle mask.
///
/// `cells` counts cells per axis; there are cells+1 nodes per axis. Linear node
/// index is x-fastest.
class Grid {
 public:
  Grid(std::array<int, 3> cells, Vec3 lower, Vec3 upper,
       std::shared_ptr<const Obstacle> obstacle = nullptr)
      : cells_(cells), lower_(lower), obstacle_(std::move(obstacle)) {
    for (int a = 0; a < 3; ++a) {
      if (cells[a] < 2) throw PreconditionError("grid needs at least 2 cells per axis");
      if (!(upper[a] > lower[a])) throw PreconditionError("grid upper corner must exceed lower corner");
      spacing_[a] = (upper[a] - lower[a]) / cells[a];
      nodes_[a] = cells[a] + 1;
    }
    stride_ = {1, static_cast<std::size_t>(nodes_[0]),
               static_cast<std::size_t>(nodes_[0]) * static_cast<std::size_t>(nodes_[1])};
    classify();
  }

  static std::shared_ptr<const Grid> cube(int cells, double half_width,
                                          std::shared_ptr<const Obstacle> obstacle = nullptr) {
    return std::make_shared<const Grid>(std::array<int, 3>{cells, cells, cells},
                                        Vec3::Constant(-half_width), Vec3::Constant(half_width),
                                        std::move(obstacle));
  }

  std::size_t size() const { return kinds_.size(); }
  const std::array<int, 3>& cells() const { return cells_; }
  const std::array<int, 3>& nodes() const { return nodes_; }
  int nodes(int axis) const { return nodes_[axis]; }
  const std::array<double, 3>& spacing() const { return spacing_; }
  double h(int axis) const { return spacing_[axis]; }
  double h_min() const { return std::min({spacing_[0], spacing_[1], spacing_[2]}); }
  const Vec3& origin() const { return lower_; }
  Vec3 upper() const {
    return lower_ + Vec3(spacing_[0] * cells_[0], spacing_[1] * cells_[1], spacing_[2] * cells_[2]);
  }
  double cell_volume() const { return spacing_[0] * spacing_[1] * spacing_[2]; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + stride_[1] * static_cast<std::size_t>(j) +
           stride_[2] * static_cast<std::size_t>(k);
  }
  std::array<int, 3> coords(std::size_t p) const {
    const int i = static_cast<int>(p % stride_[1]);
    const int j = static_cast<int>((p / stride_[1]) % static_cast<std::size_t>(nodes_[1]));
    const int k = static_cast<int>(p / stride_[2]);
    return {i, j, k};
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < nodes_[0] && j < nodes_[1] && k < nodes_[2];
  }
  Vec3 position(int i, int j, int k) const {
    return lower_ + Vec3(i * spacing_[0], j * spacing_[1], k * spacing_[2]);
  }
  Vec3 position(std::size_t p) const {
    const auto c = coords(p);
    return position(c[0], c[1], c[2]);
  }
  /// Nearest node to x (clamped to the box).
  std::size_t nearest(const Vec3& x) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const int v = static_cast<int>(std::lround((x[a] - lower_[a]) / spacing_[a]));
      c[a] = std::clamp(v, 0, nodes_[a] - 1);
    }
    return index(c[0], c[1], c[2]);
  }
  bool inside_box(const Vec3& x) const {
    const Vec3 u = upper();
    for (int a = 0; a < 3; ++a)
      if (x[a] < lower_[a] || x[a] > u[a]) return false;
    return true;
  }
  /// Number of node layers between p and the outer box (0 on the frame).
  int frame_distance(std::size_t p) const {
    const auto c = coords(p);
    int d = c[0];
    for (int a = 0; a < 3; ++a) d = std::min({d, c[a], nodes_[a] - 1 - c[a]});
    return d;
  }

  NodeKind kind(std::size_t p) const { return kinds_[p]; }
  bool fluid(std::size_t p) const { return kinds_[p] != NodeKind::masked; }
  bool masked(std::size_t p) const { return kinds_[p] == NodeKind::masked; }
  /// Nodes where the solution is pinned to zero: obstacle boundary and outer frame.
  bool dirichlet(std::size_t p) const {
    return kinds_[p] == NodeKind::boundary || kinds_[p] == NodeKind::frame;
  }
  bool active(std::size_t p) const { return kinds_[p] == NodeKind::interior; }
  bool has_obstacle() const { return static_cast<bool>(obstacle_); }
  const Obstacle* obstacle() const { return obstacle_.get(); }
  const std::vector<std::size_t>& boundary_nodes() const { return boundary_nodes_; }
  std::size_t fluid_count() const { return fluid_count_; }

  /// Chebyshev distance (in nodes) from p to the nearest masked node, capped at cap.
  int mask_distance(std::size_t p, int cap) const {
    if (!obstacle_) return cap;
    const auto c = coords(p);
    for (int r = 0; r < cap; ++r) {
      for (int dk = -r; dk <= r; ++dk)
        for (int dj = -r; dj <= r; ++dj)
          for (int di = -r; di <= r; ++di) {
            if (std::max({std::abs(di), std::abs(dj), std::abs(dk)}) != r) continue;
            const int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
            if (contains(i, j, k) && masked(index(i, j, k))) return r;
          }
    }
    return cap;
  }

  /// True when every stencil node within `radius` layers of p exists and is fluid.
  bool stencil_clear(std::size_t p, int radius) const {
    return frame_distance(p) >= radius && mask_distance(p, radius + 1) > radius;
  }

  /// Whether the fluid nodes form one 6-connected region.
  bool fluid_connected() const {
    std::vector<std::uint8_t> seen(size(), 0);
    std::size_t start = size();
    for (std::size_t p = 0; p < size(); ++p)
      if (fluid(p)) {
        start = p;
        break;
      }
    if (start == size()) return false;
    std::queue<std::size_t> todo;
    todo.push(start);
    seen[start] = 1;
    std::size_t reached = 1;
    while (!todo.empty()) {
      const std::size_t p = todo.front();
      todo.pop();
      const auto c = coords(p);
      for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
          auto n = c;
          n[a] += s;
          if (!contains(n[0], n[1], n[2])) continue;
          const std::size_t q = index(n[0], n[1], n[2]);
          if (seen[q] || !fluid(q)) continue;
          seen[q] = 1;
          ++reached;
          todo.push(q);
        }
    }
    return reached == fluid_count_;
  }

 private:
  void classify() {
    kinds_.assign(static_cast<std::size_t>(nodes_[0]) * nodes_[1] * nodes_[2], NodeKind::interior);
    if (obstacle_) {
      for (std::size_t p = 0; p < kinds_.size(); ++p)
        if (obstacle_->level(position(p)) <= 0.0) kinds_[p] = NodeKind::masked;
    }
    for (std::size_t p = 0; p < kinds_.size(); ++p) {
      if (kinds_[p] == NodeKind::masked) continue;
      if (obstacle_ && touches_mask(p)) {
        kinds_[p] = NodeKind::boundary;
        boundary_nodes_.push_back(p);
      } else if (frame_distance(p) == 0) {
        kinds_[p] = NodeKind::frame;
      }
    }
    fluid_count_ = 0;
    for (auto k : kinds_) fluid_count_ += (k != NodeKind::masked);
    if (obstacle_ && !fluid_connected())
      throw PreconditionError("obstacle mask splits the fluid region");
  }

  bool touches_mask(std::size_t p) const {
    const auto c = coords(p);
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
          if (contains(i, j, k) && kinds_[index(i, j, k)] == NodeKind::masked) return true;
        }
    return false;
  }

  std::array<int, 3> cells_{};
  std::array<int, 3> nodes_{};
  std::array<double, 3> spacing_{};
  std::array<std::size_t, 3> stride_{};
  Vec3 lower_;
  std::shared_ptr<const Obstacle> obstacle_;
  std::vector<NodeKind> kinds_;
  std::vector<std::size_t> boundary_nodes_;
  std::size_t fluid_count_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

}  // namespace conelab
