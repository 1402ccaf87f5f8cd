#pragma once

#include <array>
#include <span>
#include <vector>

#include "mvhom/grid.hpp"
#include "mvhom/models.hpp"
#include "mvhom/noise.hpp"

namespace mvhom {

struct Simulation;

/// M interacting particles u_1..u_M at a common time t_n.
struct Ensemble {
  std::vector<VectorField> members;
  std::vector<NoiseStream> streams;  // one per member
  double t = 0.0;
  long step = 0;
  /// All members see the same driving noise (stream of member 0).
  bool common_noise = false;

  std::size_t size() const noexcept { return members.size(); }
};

/// (1/M) sum_m delta_{u_m}.
EmpiricalMeasure empirical_measure(const Ensemble& ensemble);

enum class Observable { HNorm, VNorm, PointValue };

/// Scalar observable of every member; PointValue samples component 0 at the
/// node nearest `point`.
std::vector<double> observe(std::span<const VectorField> members, Observable obs,
                            const std::array<double, 2>& point = {0.5, 0.5});

/// Exact W2 between two equally sized samples on the line (sorted coupling).
/// CountMismatch when the sizes differ or either is empty.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

/// `count` order statistics of `samples` at levels (i + 1/2) / count.
std::vector<double> quantile_subsample(std::span<const double> samples, std::size_t count);

struct ChaosGap {
  std::size_t small = 0, large = 0;
  double distance = 0.0;       // W2 of the observable between the two ensembles
  double sqrt_small = 0.0;     // 1 / sqrt(small)
};

/// Runs `sim` with `small` and with `large` members (same seed and replica)
/// and compares the final-time law of `obs`. The larger sample is reduced to
/// `small` quantiles before the W2 coupling.
ChaosGap chaos_gap(const Simulation& sim, std::size_t small, std::size_t large,
                   Observable obs = Observable::HNorm);

}  // namespace mvhom
