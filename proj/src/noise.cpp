#include "mvhom/noise.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return static_cast<double>(bits) * 0x1.0p-53;
}

// Stream-id words: normals use the low bit clear, uniforms set.
constexpr std::uint32_t kNormalTag = 0u;
constexpr std::uint32_t kUniformTag = 1u;

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

NoiseStream::NoiseStream(StreamKey key, std::uint64_t counter) noexcept
    : key_(key), counter_(counter) {
  const std::uint64_t k = splitmix64(splitmix64(key.seed) ^ key.replica);
  philox_key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

double NoiseStream::normal_at(std::uint64_t i) const noexcept {
  // One Philox block yields two uniforms and, by Box-Muller, two normals.
  const std::uint64_t block = i >> 1;
  const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block),
                                   static_cast<std::uint32_t>(block >> 32),
                                   key_.member, (key_.level << 1) | kNormalTag};
  const auto r = Philox4x32::apply(ctr, philox_key_);
  const double u1 = 1.0 - to_unit(r[0], r[1]);  // (0, 1]
  const double u2 = to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return (i & 1u) ? rad * std::sin(ang) : rad * std::cos(ang);
}

double NoiseStream::uniform_at(std::uint64_t i) const noexcept {
  const std::uint64_t block = i >> 1;
  const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block),
                                   static_cast<std::uint32_t>(block >> 32),
                                   key_.member, (key_.level << 1) | kUniformTag};
  const auto r = Philox4x32::apply(ctr, philox_key_);
  return (i & 1u) ? to_unit(r[2], r[3]) : to_unit(r[0], r[1]);
}

void NoiseStream::next_normals(std::span<double> out) noexcept {
  for (double& v : out) v = normal_at(counter_++);
}

// ---------------------------------------------------------------------------

struct QWienerSpec::BasisCache {
  std::once_flag once;
  std::vector<ScalarField> fields;
};

QWienerSpec::QWienerSpec(const GridSpec& grid, std::size_t modes, double lambda0, double gamma,
                         std::uint64_t seed)
    : grid_(grid), lambda0_(lambda0), gamma_(gamma), seed_(seed) {
  if (!(lambda0 > 0.0)) throw DomainError("noise lambda0 must be positive");
  if (!(gamma > 1.0)) throw DomainError("noise decay gamma must exceed 1 (trace class)");
  if (modes == 0) modes = std::min<std::size_t>(grid.size(), 64);
  if (modes > grid.size()) throw DomainError("noise mode count exceeds resolvable modes");
  modes_ = ordered_modes(grid, modes);
  eigenvalues_.resize(modes);
  for (std::size_t k = 0; k < modes; ++k)
    eigenvalues_[k] = lambda0 * std::pow(static_cast<double>(k + 1), -gamma);
  basis_ = std::make_shared<BasisCache>();
}

const ScalarField& QWienerSpec::basis(std::size_t k) const {
  std::call_once(basis_->once, [this] {
    basis_->fields.reserve(modes_.size());
    for (const auto& m : modes_) basis_->fields.push_back(sine_mode(grid_, m));
  });
  return basis_->fields[k];
}

double QWienerSpec::tail_trace_bound() const noexcept {
  const double K = static_cast<double>(eigenvalues_.size());
  return lambda0_ * std::pow(K, 1.0 - gamma_) / (gamma_ - 1.0);
}

double partial_trace(const QWienerSpec& spec) noexcept {
  double s = 0.0;
  // Smallest first for a tighter sum.
  for (auto it = spec.eigenvalues().rbegin(); it != spec.eigenvalues().rend(); ++it) s += *it;
  return s;
}

std::vector<double> draw_step_normals(NoiseStream& stream, const QWienerSpec& spec) {
  std::vector<double> xi(spec.modes());
  stream.next_normals(xi);
  return xi;
}

ScalarField increment_from_normals(const QWienerSpec& spec, std::span<const double> xi, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (xi.size() != spec.modes()) throw DomainError("normal count must equal the mode count");
  // Synthesize through the inverse sine transform rather than summing K fields.
  std::vector<double> coeffs(spec.grid().size(), 0.0);
  const double sdt = std::sqrt(dt);
  for (std::size_t k = 0; k < xi.size(); ++k)
    coeffs[mode_index(spec.grid(), spec.basis_modes()[k])] =
        std::sqrt(spec.eigenvalues()[k]) * sdt * xi[k];
  return from_sine_coefficients(spec.grid(), coeffs);
}

ScalarField sample_increment(NoiseStream& stream, const QWienerSpec& spec, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const auto xi = draw_step_normals(stream, spec);
  return increment_from_normals(spec, xi, dt);
}

ScalarField random_smooth_field(const GridSpec& grid, NoiseStream& stream, std::size_t modes,
                                double decay) {
  const auto ks = ordered_modes(grid, modes);
  std::vector<double> coeffs(grid.size(), 0.0);
  for (std::size_t k = 0; k < ks.size(); ++k)
    coeffs[mode_index(grid, ks[k])] = std::pow(static_cast<double>(k + 1), -decay) * stream.next_normal();
  return from_sine_coefficients(grid, coeffs);
}

}  // namespace mvhom
