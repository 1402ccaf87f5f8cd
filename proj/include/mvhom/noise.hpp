#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "mvhom/grid.hpp"

namespace mvhom {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11): a keyed
/// bijection of a 128-bit counter. No state beyond key and counter.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) noexcept;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Identity of an independent stream. `level` separates eps-levels when the
/// caller wants them independent; synchronous coupling shares level 0.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint32_t member = 0;
  std::uint32_t level = 0;

  bool operator==(const StreamKey&) const = default;
};

/// Counter-indexed standard normal draws: draw i of a key is a pure function
/// of (key, i), so replay and parallel execution are bitwise reproducible.
class NoiseStream {
 public:
  explicit NoiseStream(StreamKey key, std::uint64_t counter = 0) noexcept;

  const StreamKey& key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Normal number with absolute index i (does not move the counter).
  double normal_at(std::uint64_t i) const noexcept;
  /// Uniform in [0,1) with absolute index i (separate sequence from normals).
  double uniform_at(std::uint64_t i) const noexcept;

  /// Next `count` normals; advances the counter by count.
  void next_normals(std::span<double> out) noexcept;
  double next_normal() noexcept { return normal_at(counter_++); }

 private:
  StreamKey key_;
  Philox4x32::Key philox_key_;
  std::uint64_t counter_;
};

/// Truncated Q-Wiener process W = sum_{k<=K} sqrt(lambda_k) e_k W_k with
/// lambda_k = lambda0 k^-gamma and e_k the H-orthonormal Dirichlet sine modes
/// ordered by |k|^2.
class QWienerSpec {
 public:
  /// modes = 0 selects min(n-1, 64) (1D) or min((n-1)^2, 64) (2D).
  QWienerSpec(const GridSpec& grid, std::size_t modes, double lambda0, double gamma,
              std::uint64_t seed);

  const GridSpec& grid() const noexcept { return grid_; }
  std::size_t modes() const noexcept { return eigenvalues_.size(); }
  double lambda0() const noexcept { return lambda0_; }
  double gamma() const noexcept { return gamma_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
  const std::vector<SineMode>& basis_modes() const noexcept { return modes_; }
  /// e_k as a grid field, built for all modes on first use.
  const ScalarField& basis(std::size_t k) const;

  /// Upper bound lambda0 K^(1-gamma) / (gamma - 1) on the dropped tail.
  double tail_trace_bound() const noexcept;

 private:
  GridSpec grid_;
  double lambda0_, gamma_;
  std::uint64_t seed_;
  std::vector<double> eigenvalues_;
  std::vector<SineMode> modes_;
  struct BasisCache;
  std::shared_ptr<BasisCache> basis_;
};

double partial_trace(const QWienerSpec& spec) noexcept;

/// K independent normals for one step (advancing the stream by K).
std::vector<double> draw_step_normals(NoiseStream& stream, const QWienerSpec& spec);

/// sum_k sqrt(lambda_k dt) xi_k e_k for the given normals.
ScalarField increment_from_normals(const QWienerSpec& spec, std::span<const double> xi, double dt);

/// Q-Wiener increment over dt (> 0, else DomainError).
ScalarField sample_increment(NoiseStream& stream, const QWienerSpec& spec, double dt);

/// Random smooth field sum_{k<=modes} k^-decay xi_k e_k drawn from `stream`.
ScalarField random_smooth_field(const GridSpec& grid, NoiseStream& stream, std::size_t modes,
                                double decay = 1.0);

}  // namespace mvhom
