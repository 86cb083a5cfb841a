// Backward cone from (t0, x0) on the wavy metric: cone energy, mantle flux and
// the flux identity, printed as the solution leaves the shrinking cone.

#include <cstdio>

#include "conelab/energy.hpp"

using namespace conelab;

int main() {
  const GridPtr g = Grid::cube(32, 1.0);
  auto metric = std::make_shared<const MetricField>(g, std::make_shared<WavyMetric>());
  const Vec3 x0(0.1, 0.0, 0.0);
  const ConeSpec cone{0.6, 0.0, std::make_shared<const GeodesicField>(solve_eikonal(*metric, x0))};
  const InitialData d = bump_data(g, Vec3(0.05, 0.0, 0.0), 0.45, 0.5, 0.0, 4);

  const WaveSolver ws(metric, true);
  ConeLedger l;
  l.record({0.0, d.f, d.g}, cone, *metric);
  WaveState s = ws.start(d, cfl_dt(*metric));
  while (s.t <= cone.t0 + 1e-12) {
    WaveState next = ws.step(s);
    l.record(snapshot_between(s, next), cone, *metric);
    s = std::move(next);
  }

  std::printf("%8s %12s %12s %14s %14s\n", "t", "E_cone/E0", "L6/E0", "flux_identity", "flux_direct");
  for (std::size_t k = 0; k < l.size(); k += 4)
    std::printf("%8.4f %12.6f %12.3e %14.6e %14.6e\n", l.t[k], l.cone_energy[k] / l.e0, l.l6_mass[k] / l.e0,
                flux_from_identity(l, l.t[0], l.t[k]), flux_direct(l, l.t[0], l.t[k]));
  std::printf("energy drift %.3e\n", l.energy_drift());
}
