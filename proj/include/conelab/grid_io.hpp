#pragma once

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "conelab/field.hpp"

namespace conelab {

/// Text dump: `dims nx ny nz` (node counts), `spacing`, `origin`, then one value
/// per line in x-fastest order. Values are written with round-trip precision.
inline void write_grid_dump(std::ostream& os, const ScalarField& w) {
  const Grid& g = w.grid();
  os << "dims " << g.nodes(0) << ' ' << g.nodes(1) << ' ' << g.nodes(2) << '\n';
  os << std::setprecision(17);
  os << "spacing " << g.h(0) << ' ' << g.h(1) << ' ' << g.h(2) << '\n';
  os << "origin " << g.origin()[0] << ' ' << g.origin()[1] << ' ' << g.origin()[2] << '\n';
  for (std::size_t p = 0; p < w.size(); ++p) os << w[p] << '\n';
}

/// Reads a dump written by write_grid_dump onto a matching, obstacle-free grid.
inline ScalarField read_grid_dump(std::istream& is) {
  std::string key;
  std::array<int, 3> dims{};
  Vec3 spacing, origin;
  is >> key >> dims[0] >> dims[1] >> dims[2];
  if (key != "dims") throw ConfigError("grid dump: expected 'dims' header", 1);
  is >> key >> spacing[0] >> spacing[1] >> spacing[2];
  if (key != "spacing") throw ConfigError("grid dump: expected 'spacing' header", 2);
  is >> key >> origin[0] >> origin[1] >> origin[2];
  if (key != "origin") throw ConfigError("grid dump: expected 'origin' header", 3);
  const std::array<int, 3> cells{dims[0] - 1, dims[1] - 1, dims[2] - 1};
  const Vec3 upper = origin + Vec3(spacing[0] * cells[0], spacing[1] * cells[1], spacing[2] * cells[2]);
  auto grid = std::make_shared<const Grid>(cells, origin, upper);
  ScalarField w(grid);
  for (std::size_t p = 0; p < w.size(); ++p) {
    if (!(is >> w[p])) throw ConfigError("grid dump: truncated value list", static_cast<int>(p) + 4);
  }
  return w;
}

}  // namespace conelab
