#include "mvhom/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/errors.hpp"
#include "mvhom/parallel.hpp"

namespace mvhom {

// ---- pairing ----------------------------------------------------------------------

PairingAccumulator::PairingAccumulator(const GridSpec& grid, PairingTest test, double eps,
                                       int component)
    : grid_(grid), test_(std::move(test)), eps_(eps), component_(component) {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  if (test_.stationary) tabulate(0.0);
}

void PairingAccumulator::tabulate(double t) {
  weights_.resize(grid_.size());
  const double vol = grid_.cell_volume();
  const double tau = frac(t / eps_);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const double x1 = grid_.coordinate(i, 0);
    const double x2 = grid_.dim() == 2 ? grid_.coordinate(i, 1) : 0.0;
    weights_[i] = vol * test_.w(x1, x2, t) * test_.phi(frac(x1 / eps_), frac(x2 / eps_), tau);
  }
}

void PairingAccumulator::add(const VectorField& u, double t, double dt) {
  if (!(u.grid() == grid_)) throw DomainError("pairing grid mismatch");
  if (!test_.stationary) tabulate(t);
  const auto v = u[component_].values();
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * weights_[i];
  sum_ += dt * s;
}

double two_scale_pairing(std::span<const VectorField> trajectory, double dt, const PairingTest& test,
                         double eps, int component) {
  if (trajectory.empty()) return 0.0;
  PairingAccumulator acc(trajectory.front().grid(), test, eps, component);
  for (std::size_t n = 0; n + 1 < trajectory.size(); ++n)
    acc.add(trajectory[n], static_cast<double>(n) * dt, dt);
  return acc.value();
}

// ---- corrector reconstruction -----------------------------------------------------

namespace {

// Value at full lattice index (i, j) in [0, n]^2 with ghost zeros.
inline double full_value(std::span<const double> u, int n, int i, int j) noexcept {
  if (i <= 0 || j <= 0 || i >= n || j >= n) return 0.0;
  return u[static_cast<std::size_t>(i - 1) * (n - 1) + (j - 1)];
}

inline double full_value_1d(std::span<const double> u, int n, int i) noexcept {
  return (i <= 0 || i >= n) ? 0.0 : u[i - 1];
}

}  // namespace

CorrectorReconstruction::CorrectorReconstruction(const GridSpec& grid, const CellSolution& cell,
                                                 double eps)
    : grid_(grid), cell_(&cell), eps_(eps) {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  if (cell.grid().dim != grid.dim()) throw DomainError("cell and grid dimensions differ");
  stationary_ = cell.grid().slices == 1;
  if (stationary_) fixed_ = tabulate(0.0);
}

CorrectorReconstruction::Tables CorrectorReconstruction::tabulate(double t) const {
  const int N = grid_.dim();
  const int n = grid_.cells();
  const int m = grid_.interior();
  const double h = grid_.spacing();
  const double tau = frac(t / eps_);
  Tables tables(static_cast<std::size_t>(N * N));
  if (N == 1) {
    auto& T = tables[0];
    T.resize(n);
    for (int f = 0; f < n; ++f) T[f] = cell_->gradient_at(0, 0, frac((f + 0.5) * h / eps_), 0.0, tau);
    return tables;
  }
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      auto& T = tables[j * 2 + i];
      T.resize(static_cast<std::size_t>(n) * m);
      for (int a = 0; a < (j == 0 ? n : m); ++a)
        for (int b = 0; b < (j == 0 ? m : n); ++b) {
          // Axis-0 faces (a + 1/2, b + 1); axis-1 faces (a + 1, b + 1/2), in units of h.
          const double x1 = j == 0 ? (a + 0.5) * h : (a + 1) * h;
          const double x2 = j == 0 ? (b + 1) * h : (b + 0.5) * h;
          T[static_cast<std::size_t>(a) * (j == 0 ? m : n) + b] =
              cell_->gradient_at(i, j, frac(x1 / eps_), frac(x2 / eps_), tau);
        }
    }
  return tables;
}

GradientResiduals CorrectorReconstruction::residuals(const ScalarField& u_eps, const ScalarField& u_hom,
                                                      double t) const {
  if (!(u_eps.grid() == grid_) || !(u_hom.grid() == grid_))
    throw DomainError("corrector residual grid mismatch");
  Tables local;
  const Tables& T = stationary_ ? fixed_ : (local = tabulate(t));
  const int n = grid_.cells();
  const int m = grid_.interior();
  const double h = grid_.spacing();
  const auto ue = u_eps.values();
  const auto uh = u_hom.values();
  GradientResiduals r;
  if (grid_.dim() == 1) {
    const auto& D = T[0];
    for (int f = 0; f < n; ++f) {
      const double ge = (full_value_1d(ue, n, f + 1) - full_value_1d(ue, n, f)) / h;
      const double g = (full_value_1d(uh, n, f + 1) - full_value_1d(uh, n, f)) / h;
      const double term = g * D[f];
      r.plain_sq += (ge - g) * (ge - g);
      r.corrected_sq += (ge - g - term) * (ge - g - term);
      r.term_sq += term * term;
    }
  } else {
    auto tangential = [&](std::span<const double> u, int i, int j, int axis) {
      if (i <= 0 || j <= 0 || i >= n || j >= n) return 0.0;  // ghost node
      return axis == 0 ? (full_value(u, n, i + 1, j) - full_value(u, n, i - 1, j)) / (2 * h)
                       : (full_value(u, n, i, j + 1) - full_value(u, n, i, j - 1)) / (2 * h);
    };
    for (int j = 0; j < 2; ++j) {
      const int other = 1 - j;
      const int rows = j == 0 ? n : m, cols = j == 0 ? m : n;
      for (int a = 0; a < rows; ++a)
        for (int b = 0; b < cols; ++b) {
          // Full-lattice end points P, Q of the face.
          const int pi = j == 0 ? a : a + 1, pj = j == 0 ? b + 1 : b;
          const int qi = a + 1, qj = b + 1;
          const double ge = (full_value(ue, n, qi, qj) - full_value(ue, n, pi, pj)) / h;
          double g[2];
          g[j] = (full_value(uh, n, qi, qj) - full_value(uh, n, pi, pj)) / h;
          g[other] = 0.5 * (tangential(uh, pi, pj, other) + tangential(uh, qi, qj, other));
          const std::size_t face = static_cast<std::size_t>(a) * cols + b;
          const double term = g[0] * T[j * 2 + 0][face] + g[1] * T[j * 2 + 1][face];
          r.plain_sq += (ge - g[j]) * (ge - g[j]);
          r.corrected_sq += (ge - g[j] - term) * (ge - g[j] - term);
          r.term_sq += term * term;
        }
    }
  }
  const double vol = grid_.cell_volume();
  r.plain_sq *= vol;
  r.corrected_sq *= vol;
  r.term_sq *= vol;
  return r;
}

CorrectorResidual corrector_residual(const std::vector<std::vector<VectorField>>& eps_paths,
                                     const std::vector<std::vector<VectorField>>& hom_paths,
                                     const CellSolution& cell, double eps, double dt) {
  if (eps_paths.size() != hom_paths.size())
    throw CountMismatch("corrector residual needs one homogenized path per eps path");
  if (eps_paths.empty()) return {};
  const GridSpec& grid = eps_paths.front().front().grid();
  const CorrectorReconstruction recon(grid, cell, eps);
  double plain = 0.0, corrected = 0.0, term = 0.0;
  for (std::size_t p = 0; p < eps_paths.size(); ++p) {
    if (eps_paths[p].size() != hom_paths[p].size())
      throw CountMismatch("trajectories on different clocks");
    for (std::size_t n = 1; n < eps_paths[p].size(); ++n)
      for (int c = 0; c < eps_paths[p][n].component_count(); ++c) {
        const auto r = recon.residuals(eps_paths[p][n][c], hom_paths[p][n][c], n * dt);
        plain += dt * r.plain_sq;
        corrected += dt * r.corrected_sq;
        term += dt * r.term_sq;
      }
  }
  const double P = static_cast<double>(eps_paths.size());
  return {std::sqrt(plain / P), std::sqrt(corrected / P), std::sqrt(term / P)};
}

// ---- ladder -----------------------------------------------------------------------

void LadderConfig::validate() const {
  if (eps.empty()) throw DomainError("epsilon list is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw DomainError("epsilon values must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw DomainError("epsilon list must be strictly decreasing");
  }
  const double smallest = eps.back();
  if (base.grid.cells() * smallest < 16.0 - 1e-9)
    throw DomainError("grid needs n >= 16/eps cells per axis for the smallest epsilon");
  if (base.stepper.dt > smallest / 8.0 * (1.0 + 1e-12))
    throw DomainError("time step must satisfy dt <= eps/8 for the smallest epsilon");
  if (replicas == 0) throw DomainError("ladder needs at least one replica");
  if (base.members == 0) throw DomainError("ensemble needs at least one member");
  if (cell.dim != base.grid.dim()) throw DomainError("cell and grid dimensions differ");
  cell.validate();
  base.stepper.validate();
  ModelSpec probe = base.model;
  probe.eps = smallest;
  probe.validate(base.grid);
}

namespace {

struct ReplicaLevel {
  double error_sq = 0, plain_sq = 0, corrected_sq = 0, term_sq = 0;
  double energy = 0, moment = 0, pairing = 0;
  std::vector<double> final_norm, H2, Hp;
};

std::vector<ReplicaLevel> run_replica(const LadderConfig& cfg, const std::vector<Stepper>& steppers,
                                      const std::vector<CorrectorReconstruction>& recon,
                                      std::size_t replica) {
  const Simulation& sim = cfg.base;
  const std::size_t L = steppers.size();
  const std::size_t hom = L - 1;
  const std::size_t M = sim.members;
  const long N = sim.stepper.steps();
  const double dt = sim.stepper.dt;
  const int p = sim.stepper.moment_order;

  std::vector<std::vector<VectorField>> states(L);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t m = 0; m < M; ++m) states[l].push_back(sim.initial.make(sim.grid, steppers[l].model(), m, M));

  // Synchronous coupling: every level draws member m's noise from one key.
  std::vector<NoiseStream> streams;
  for (std::size_t m = 0; m < M; ++m)
    streams.emplace_back(StreamKey{sim.seed, replica, static_cast<std::uint32_t>(m), 0});

  PairingTest test;
  test.phi = [](double y1, double, double) { return std::sin(2.0 * std::numbers::pi * y1); };
  std::vector<PairingAccumulator> pairing;
  for (std::size_t l = 0; l < L; ++l)
    pairing.emplace_back(sim.grid, test, l == hom ? 1.0 : cfg.eps[l]);

  std::vector<std::vector<EnergyLedger>> ledgers(L, std::vector<EnergyLedger>(M, EnergyLedger(p)));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t m = 0; m < M; ++m) ledgers[l][m].record(0, 0.0, dt, states[l][m], 0.0, 0.0);

  std::vector<ReplicaLevel> out(L);
  for (auto& o : out) {
    o.H2.assign(N + 1, 0.0);
    o.Hp.assign(N + 1, 0.0);
  }
  auto record_moments = [&](long n) {
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t m = 0; m < M; ++m) {
        const auto& r = ledgers[l][m].records().back();
        out[l].H2[n] += r.H2 / static_cast<double>(M);
        out[l].Hp[n] += r.Hp / static_cast<double>(M);
      }
  };
  record_moments(0);

  const std::size_t K = steppers.front().noise().modes();
  std::vector<std::vector<double>> xi(M, std::vector<double>(K));
  const double wM = 1.0 / static_cast<double>(M);
  for (long n = 0; n < N; ++n) {
    const double t = static_cast<double>(n) * dt;
    for (std::size_t m = 0; m < M; ++m) streams[m].next_normals(xi[m]);
    if (sim.common_noise)
      for (std::size_t m = 1; m < M; ++m) xi[m] = xi[0];
    for (std::size_t l = 0; l < L; ++l) {
      const EmpiricalMeasure mu = EmpiricalMeasure::from_members(states[l]);
      const auto solver = steppers[l].solver_at(t);
      for (std::size_t m = 0; m < M; ++m) {
        pairing[l].add(states[l][m], t, dt * wM);
        Stepper::Work w;
        VectorField next = steppers[l].advance(states[l][m], mu, xi[m], t, *solver, &w);
        states[l][m] = std::move(next);
        ledgers[l][m].record(n + 1, t + dt, dt, states[l][m], w.drift, w.noise);
      }
    }
    const double t1 = static_cast<double>(n + 1) * dt;
    for (std::size_t l = 0; l < hom; ++l)
      for (std::size_t m = 0; m < M; ++m) {
        const VectorField& ue = states[l][m];
        const VectorField& uh = states[hom][m];
        for (int c = 0; c < ue.component_count(); ++c) {
          const auto a = ue[c].values();
          const auto b = uh[c].values();
          double s = 0.0;
          for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
          out[l].error_sq += dt * wM * s * sim.grid.cell_volume();
          const auto r = recon[l].residuals(ue[c], uh[c], t1);
          out[l].plain_sq += dt * wM * r.plain_sq;
          out[l].corrected_sq += dt * wM * r.corrected_sq;
          out[l].term_sq += dt * wM * r.term_sq;
        }
      }
    record_moments(n + 1);
  }
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t m = 0; m < M; ++m) {
      out[l].energy += wM * ledgers[l][m].energy_functional();
      out[l].moment += wM * ledgers[l][m].moment_functional();
      out[l].final_norm.push_back(norm_H(states[l][m]));
    }
    out[l].pairing = pairing[l].value();
  }
  return out;
}

Estimate estimate(const std::vector<double>& v) {
  Estimate e;
  if (v.empty()) return e;
  const double n = static_cast<double>(v.size());
  for (double x : v) e.mean += x;
  e.mean /= n;
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(s / (n - 1.0) / n);
  }
  return e;
}

// sqrt of a mean of squares, with the delta-method standard error.
Estimate root_estimate(const std::vector<double>& squares) {
  const Estimate sq = estimate(squares);
  Estimate e;
  e.mean = std::sqrt(std::max(sq.mean, 0.0));
  e.se = e.mean > 0.0 ? sq.se / (2.0 * e.mean) : 0.0;
  return e;
}

}  // namespace

LadderRaw run_ladder(const LadderConfig& config) {
  config.validate();
  const CellSolution cell =
      solve_cell_problem(config.base.model.field, config.cell, config.cell_tol, config.base.workers);
  return run_ladder(config, cell);
}

LadderRaw run_ladder(const LadderConfig& config, const CellSolution& cell) {
  config.validate();
  const Simulation& sim = config.base;
  const std::size_t E = config.eps.size();

  std::vector<Stepper> steppers;
  std::vector<CorrectorReconstruction> recon;
  for (std::size_t l = 0; l < E; ++l) {
    ModelSpec model = sim.model;
    model.eps = config.eps[l];
    model.homogenized.reset();
    steppers.emplace_back(sim.grid, model, sim.noise, sim.stepper);
    recon.emplace_back(sim.grid, cell, config.eps[l]);
  }
  ModelSpec hom = sim.model;
  hom.eps = 1.0;
  hom.homogenized = cell.tensor();
  steppers.emplace_back(sim.grid, hom, sim.noise, sim.stepper);

  std::vector<std::vector<ReplicaLevel>> results(config.replicas);
  parallel_for(config.replicas, sim.workers,
               [&](std::size_t r) { results[r] = run_replica(config, steppers, recon, r); });

  LadderRaw raw;
  raw.eps = config.eps;
  raw.replicas = config.replicas;
  raw.members = sim.members;
  raw.steps = sim.stepper.steps();
  raw.dt = sim.stepper.dt;
  raw.moment_order = sim.stepper.moment_order;
  raw.tensor = cell.tensor();
  raw.levels.resize(E + 1);
  for (std::size_t l = 0; l <= E; ++l) {
    auto& lv = raw.levels[l];
    lv.mean_H2.assign(raw.steps + 1, 0.0);
    lv.mean_Hp.assign(raw.steps + 1, 0.0);
    for (std::size_t r = 0; r < config.replicas; ++r) {
      const auto& o = results[r][l];
      lv.error_sq.push_back(o.error_sq);
      lv.plain_sq.push_back(o.plain_sq);
      lv.corrected_sq.push_back(o.corrected_sq);
      lv.term_sq.push_back(o.term_sq);
      lv.energy.push_back(o.energy);
      lv.moment.push_back(o.moment);
      lv.pairing.push_back(o.pairing);
      lv.final_norm.insert(lv.final_norm.end(), o.final_norm.begin(), o.final_norm.end());
      for (long n = 0; n <= raw.steps; ++n) {
        lv.mean_H2[n] += o.H2[n] / static_cast<double>(config.replicas);
        lv.mean_Hp[n] += o.Hp[n] / static_cast<double>(config.replicas);
      }
    }
  }
  return raw;
}

ConvergenceReport assemble_report(const LadderRaw& raw) {
  if (raw.levels.size() != raw.eps.size() + 1) throw CountMismatch("ladder raw data has the wrong level count");
  ConvergenceReport rep;
  rep.eps = raw.eps;
  rep.replicas = raw.replicas;
  rep.members = raw.members;
  rep.steps = raw.steps;
  rep.dt = raw.dt;
  rep.moment_order = raw.moment_order;
  rep.tensor = raw.tensor;
  rep.coupling =
      "synchronous: every eps-level and the homogenized run share the noise of each "
      "(replica, member); law-level check is W2 of |u(T)|_H";
  const auto& hom_raw = raw.levels.back();
  auto level_report = [&](const LadderRaw::Level& lv, double eps) {
    LevelReport r;
    r.eps = eps;
    r.error = root_estimate(lv.error_sq);
    r.plain = root_estimate(lv.plain_sq);
    r.corrected = root_estimate(lv.corrected_sq);
    r.term = root_estimate(lv.term_sq);
    r.energy = estimate(lv.energy);
    r.moment = estimate(lv.moment);
    r.pairing = estimate(lv.pairing);
    r.sup_mean_H2 = lv.mean_H2.empty() ? 0.0 : *std::max_element(lv.mean_H2.begin(), lv.mean_H2.end());
    r.sup_mean_Hp = lv.mean_Hp.empty() ? 0.0 : *std::max_element(lv.mean_Hp.begin(), lv.mean_Hp.end());
    r.w2_final_norm = lv.final_norm.empty() ? 0.0 : wasserstein2_1d(lv.final_norm, hom_raw.final_norm);
    return r;
  };
  for (std::size_t l = 0; l < raw.eps.size(); ++l) rep.levels.push_back(level_report(raw.levels[l], raw.eps[l]));
  rep.homogenized = level_report(hom_raw, 0.0);
  return rep;
}

}  // namespace mvhom
