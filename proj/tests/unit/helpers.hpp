#pragma once

#include <cstdint>

#include "mvhom/grid.hpp"
#include "mvhom/integrator.hpp"
#include "mvhom/noise.hpp"

namespace mvhom::test {

/// Smooth random field with `modes` sine modes, drawn from a fixed key.
inline ScalarField random_field(const GridSpec& g, std::uint64_t seed, std::size_t modes = 12) {
  NoiseStream s(StreamKey{seed, 7, 3, 11});
  return random_smooth_field(g, s, modes, 1.0);
}

inline double uniform(std::uint64_t seed, std::uint64_t i) {
  return NoiseStream(StreamKey{seed, 1, 2, 3}).uniform_at(i);
}

/// Small 1D Allen-Cahn setup: layered coefficient, eps 1/8, n 32.
inline Simulation small_simulation(std::size_t members, double sigma0 = 0.2) {
  Simulation sim;
  sim.grid = GridSpec(1, 32);
  sim.model.field = CoefficientField::layered(1, 2.0, 1.0);
  sim.model.eps = 1.0 / 8;
  sim.model.sigma0 = sigma0;
  sim.noise = QWienerSpec(sim.grid, 8, 1.0, 2.0, 17);
  sim.stepper.dt = 1e-3;
  sim.stepper.horizon = 0.05;
  sim.members = members;
  sim.seed = 17;
  return sim;
}

}  // namespace mvhom::test
