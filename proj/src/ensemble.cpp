#include "mvhom/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "mvhom/errors.hpp"
#include "mvhom/integrator.hpp"

namespace mvhom {

EmpiricalMeasure empirical_measure(const Ensemble& ensemble) {
  return EmpiricalMeasure::from_members(ensemble.members);
}

std::vector<double> observe(std::span<const VectorField> members, Observable obs,
                            const std::array<double, 2>& point) {
  std::vector<double> out;
  out.reserve(members.size());
  for (const auto& u : members) {
    switch (obs) {
      case Observable::HNorm:
        out.push_back(norm_H(u));
        break;
      case Observable::VNorm:
        out.push_back(norm_V(u));
        break;
      case Observable::PointValue: {
        const GridSpec& g = u.grid();
        std::size_t idx = 0;
        for (int d = 0; d < g.dim(); ++d) {
          const long i = std::lround(point[d] * g.cells()) - 1;
          const long c = std::clamp<long>(i, 0, g.interior() - 1);
          idx += static_cast<std::size_t>(c) * g.stride(d);
        }
        out.push_back(u[0][idx]);
        break;
      }
    }
  }
  return out;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size())
    throw CountMismatch("W2 needs two non-empty samples of equal size (got " +
                        std::to_string(a.size()) + " and " + std::to_string(b.size()) + ")");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> quantile_subsample(std::span<const double> samples, std::size_t count) {
  if (samples.empty() || count == 0) throw CountMismatch("quantile subsample of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double level = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const auto k = static_cast<std::size_t>(std::floor(level * n));
    out[i] = sorted[std::min(k, sorted.size() - 1)];
  }
  return out;
}

ChaosGap chaos_gap(const Simulation& sim, std::size_t small, std::size_t large, Observable obs) {
  if (small == 0 || small >= large) throw DomainError("chaos_gap needs 0 < M_small < M_large");
  auto final_sample = [&](std::size_t members) {
    Simulation s = sim;
    s.members = members;
    auto run = run_ensemble(initial_ensemble(s), s);
    return observe(run.final.members, obs);
  };
  const auto a = final_sample(small);
  const auto b = quantile_subsample(final_sample(large), small);
  ChaosGap gap;
  gap.small = small;
  gap.large = large;
  gap.distance = wasserstein2_1d(a, b);
  gap.sqrt_small = 1.0 / std::sqrt(static_cast<double>(small));
  return gap;
}

}  // namespace mvhom
