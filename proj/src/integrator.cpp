#include "mvhom/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "mvhom/errors.hpp"
#include "mvhom/parallel.hpp"

namespace mvhom {

long StepperConfig::steps() const {
  const double r = horizon / dt;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, n))
    throw DomainError("horizon T must be an integer multiple of dt");
  return static_cast<long>(n);
}

void StepperConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon T must be positive");
  if (!(tol > 0.0)) throw DomainError("solver tolerance must be positive");
  if (moment_order < 2) throw DomainError("moment order p must be at least 2");
  if (steps() > max_steps) throw DomainError("step count exceeds max_steps");
}

VectorField InitialCondition::make(const GridSpec& grid, const ModelSpec& model,
                                   std::size_t member, std::size_t members) const {
  const int comps = model.components();
  VectorField u(grid, comps);
  if (shape == "sine") {
    // Scalar: the lowest mode. Fluid: component c doubles the frequency along axis c.
    for (int c = 0; c < comps; ++c)
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        double v = amplitude;
        for (int d = 0; d < grid.dim(); ++d) {
          const double k = (comps > 1 && d == c) ? 2.0 : 1.0;
          v *= std::sin(k * std::numbers::pi * grid.coordinate(idx, d));
        }
        u[c][idx] = v;
      }
  } else if (shape == "random") {
    // Level tag far above any eps-level so these draws never meet step noise.
    NoiseStream s(StreamKey{seed, 0, static_cast<std::uint32_t>(member), 0x40000000u});
    for (int c = 0; c < comps; ++c) {
      u[c] = random_smooth_field(grid, s, 16, 1.5);
      u[c] *= amplitude;
    }
  } else {
    throw DomainError("unknown initial shape '" + shape + "'");
  }
  if (model.has_B()) u = leray_project(u);
  if (spread != 0.0 && members > 1)
    u *= 1.0 + spread * (static_cast<double>(member) / static_cast<double>(members - 1) - 0.5);
  return u;
}

// ---- ledger -----------------------------------------------------------------------

void EnergyLedger::record(long step, double t, double dt, const VectorField& u, double drift_work,
                          double noise_work) {
  LedgerRecord r;
  r.step = step;
  r.t = t;
  const double h = norm_H(u);
  r.H2 = h * h;
  r.Hp = std::pow(h, p_);
  double v2 = 0.0;
  for (int c = 0; c < u.component_count(); ++c) v2 += gradient_energy(u[c]);
  r.V2 = v2;
  const double l4 = norm_L4(u);
  r.L4 = l4 * l4 * l4 * l4;
  if (!records_.empty()) {
    const LedgerRecord& prev = records_.back();
    dt_ = dt;
    r.dissipation = prev.dissipation + dt * r.V2;
    r.quartic = prev.quartic + dt * r.L4;
    r.drift_work = prev.drift_work + drift_work;
    r.noise_work = prev.noise_work + noise_work;
  }
  records_.push_back(r);
}

double EnergyLedger::energy_functional() const noexcept {
  double sup = 0.0;
  for (const auto& r : records_) sup = std::max(sup, r.H2);
  if (records_.empty()) return 0.0;
  return sup + records_.back().dissipation + records_.back().quartic;
}

double EnergyLedger::moment_functional() const noexcept {
  double sup = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    sup = std::max(sup, r.Hp);
    if (i > 0) sum += dt_ * std::pow(r.H2, 0.5 * (p_ - 2)) * (r.V2 + r.L4);
  }
  return sup + sum;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

void write_ledger_csv(std::ostream& out, std::span<const LedgerRecord> records) {
  out << "step,t,H2,Hp,V2,L4,dissipation\n";
  for (const auto& r : records) {
    out << r.step << ',';
    for (double v : {r.t, r.H2, r.Hp, r.V2, r.L4}) {
      put(out, v);
      out << ',';
    }
    put(out, r.dissipation);
    out << '\n';
  }
}

void EnergyLedger::write_csv(std::ostream& out) const { write_ledger_csv(out, records_); }

// ---- stepper ----------------------------------------------------------------------

Stepper::Stepper(const GridSpec& grid, const ModelSpec& model, const QWienerSpec& noise,
                 const StepperConfig& config)
    : grid_(grid), model_(model), noise_(noise), config_(config) {
  model_.validate(grid_);
  config_.validate();
  if (!(noise_.grid() == grid_)) throw DomainError("noise and model grids differ");
  if (!model_.time_dependent_operator())
    fixed_solver_ = std::make_shared<const ImplicitSolver>(model_.diffusion(grid_, 0.0), config_.dt,
                                                           config_.tol);
}

std::shared_ptr<const ImplicitSolver> Stepper::solver_at(double t) const {
  if (fixed_solver_) return fixed_solver_;
  return std::make_shared<const ImplicitSolver>(model_.diffusion(grid_, t), config_.dt, config_.tol);
}

double Stepper::step_guard(const VectorField& u) const noexcept {
  const double umax = max_abs(u);
  double reaction = 0.0;
  if (model_.cubic && model_.variant == ModelVariant::AllenCahn) reaction += 1.0 + 3.0 * umax * umax;
  if (model_.drag) reaction += 1.0;
  const double transport = model_.has_B() ? umax / grid_.spacing() : 0.0;
  return config_.dt * (transport + reaction);
}

VectorField Stepper::advance(const VectorField& u, const EmpiricalMeasure& mu,
                             std::span<const double> xi, double t, const ImplicitSolver& solver,
                             Work* work) const {
  const double guard = step_guard(u);
  if (guard > 0.5)
    throw StepRejected("step guard dt (|u|_inf/h + reaction) exceeds 1/2 at t = " + std::to_string(t),
                       guard);
  const double dt = config_.dt;
  VectorField rhs = u;
  VectorField f = apply_F(u, mu, model_, t);
  rhs.axpy(dt, f);
  if (model_.has_B()) rhs.axpy(-dt, apply_B(u, u));
  VectorField g = model_.sigma0 > 0.0 ? apply_G_increment(u, xi, dt, noise_, model_)
                                      : VectorField(u.grid(), u.component_count());
  rhs += g;
  if (work) {
    work->drift = dt * inner_H(f, u);
    work->noise = inner_H(g, u);
  }
  std::vector<ScalarField> next;
  next.reserve(u.component_count());
  for (int c = 0; c < u.component_count(); ++c) next.push_back(solver.solve(rhs[c]));
  VectorField out(std::move(next));
  if (model_.has_B()) out = leray_project(out);
  if (!out.all_finite())
    throw NonFinite("non-finite state after step at t = " + std::to_string(t) +
                    " (|u^n|_inf = " + std::to_string(max_abs(u)) + ")");
  return out;
}

VectorField step(const VectorField& u, const Stepper& stepper, const EmpiricalMeasure& mu,
                 NoiseStream& stream, double t) {
  const auto xi = draw_step_normals(stream, stepper.noise());
  return stepper.advance(u, mu, xi, t, *stepper.solver_at(t));
}

// ---- ensembles --------------------------------------------------------------------

Ensemble initial_ensemble(const Simulation& sim) {
  if (sim.members == 0) throw DomainError("ensemble needs at least one member");
  Ensemble e;
  e.common_noise = sim.common_noise;
  e.members.reserve(sim.members);
  e.streams.reserve(sim.members);
  for (std::size_t m = 0; m < sim.members; ++m) {
    e.members.push_back(sim.initial.make(sim.grid, sim.model, m, sim.members));
    e.streams.emplace_back(
        StreamKey{sim.seed, sim.replica, static_cast<std::uint32_t>(m), sim.level});
  }
  return e;
}

EnsembleRun run_ensemble(Ensemble ensemble, const Simulation& sim, const StepObserver& observer) {
  const Stepper stepper(sim.grid, sim.model, sim.noise, sim.stepper);
  const long steps = sim.stepper.steps();
  const double dt = sim.stepper.dt;
  const std::size_t M = ensemble.size();
  if (M == 0) throw DomainError("ensemble needs at least one member");
  if (ensemble.streams.size() != M) throw DomainError("one noise stream per member required");

  EnsembleRun run{std::move(ensemble), {}};
  Ensemble& e = run.final;
  run.ledgers.assign(M, EnergyLedger(sim.stepper.moment_order));
  for (std::size_t m = 0; m < M; ++m) run.ledgers[m].record(e.step, e.t, dt, e.members[m], 0.0, 0.0);

  const std::size_t K = sim.noise.modes();
  std::vector<std::vector<double>> xi(M, std::vector<double>(K));
  std::vector<Stepper::Work> work(M);
  for (long n = 0; n < steps; ++n) {
    const EmpiricalMeasure mu = empirical_measure(e);
    const auto solver = stepper.solver_at(e.t);
    if (e.common_noise) {
      e.streams[0].next_normals(xi[0]);
      for (std::size_t m = 1; m < M; ++m) xi[m] = xi[0];
    } else {
      for (std::size_t m = 0; m < M; ++m) e.streams[m].next_normals(xi[m]);
    }
    std::vector<VectorField> next(e.members);
    parallel_for(M, sim.workers, [&](std::size_t m) {
      next[m] = stepper.advance(e.members[m], mu, xi[m], e.t, *solver, &work[m]);
    });
    e.members = std::move(next);
    ++e.step;
    e.t = static_cast<double>(e.step) * dt;
    for (std::size_t m = 0; m < M; ++m)
      run.ledgers[m].record(e.step, e.t, dt, e.members[m], work[m].drift, work[m].noise);
    if (observer) observer(e.step, e);
  }
  return run;
}

// ---- increment scaling ----------------------------------------------------------------

namespace {

std::vector<long> checked_lags(const std::vector<long>& lags) {
  if (lags.size() < 4) throw DomainError("increment scaling needs at least 4 lags");
  std::vector<long> sorted = lags;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() <= 0 || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DomainError("lags must be distinct positive step counts");
  if (sorted.back() < 10 * sorted.front()) throw DomainError("lags must span at least a decade");
  return sorted;
}

}  // namespace

IncrementAccumulator::IncrementAccumulator(const std::vector<long>& lags, std::size_t paths)
    : lags_(checked_lags(lags)),
      window_(static_cast<std::size_t>(lags_.back()) + 1),
      ring_(paths),
      seen_(paths, 0),
      sum_(lags_.size(), 0.0),
      count_(lags_.size(), 0.0) {
  if (paths == 0) throw DomainError("increment scaling needs at least one path");
}

void IncrementAccumulator::add(std::size_t path, const VectorField& u) {
  // Coordinates are linear in u, so increments are differences of them.
  std::vector<double> c;
  for (int k = 0; k < u.component_count(); ++k) {
    auto ck = hminus1_coordinates(u[k]);
    c.insert(c.end(), ck.begin(), ck.end());
  }
  auto& ring = ring_.at(path);
  if (ring.empty()) ring.resize(window_);
  const long n = seen_[path];
  for (std::size_t l = 0; l < lags_.size(); ++l) {
    if (n < lags_[l]) break;
    const auto& prev = ring[static_cast<std::size_t>(n - lags_[l]) % window_];
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = c[i] - prev[i];
      s += d * d;
    }
    sum_[l] += s;
    count_[l] += 1.0;
  }
  ring[static_cast<std::size_t>(n) % window_] = std::move(c);
  ++seen_[path];
}

std::vector<double> IncrementAccumulator::mean_square() const {
  std::vector<double> ms(lags_.size());
  for (std::size_t l = 0; l < lags_.size(); ++l) {
    if (count_[l] == 0.0) throw DomainError("path shorter than the largest lag");
    ms[l] = sum_[l] / count_[l];
  }
  return ms;
}

IncrementFit fit_increments(const std::vector<long>& lags, const std::vector<double>& mean_square, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (lags.size() != mean_square.size()) throw DomainError("one mean square per lag expected");
  IncrementFit fit;
  fit.lags = lags;
  fit.mean_square = mean_square;
  for (double v : fit.mean_square)
    if (!(v > 1e-300)) fit.degenerate = true;
  if (fit.degenerate) {
    fit.slope = fit.intercept = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double L = static_cast<double>(lags.size());
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const double x = std::log(static_cast<double>(lags[l]) * dt);
    const double y = std::log(fit.mean_square[l]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.slope = (L * sxy - sx * sy) / (L * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / L;
  return fit;
}

IncrementFit increment_scaling(const std::vector<std::vector<VectorField>>& paths,
                               const std::vector<long>& lags, double dt) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  IncrementAccumulator acc(lags, paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    if (static_cast<long>(paths[p].size()) <= acc.lags().back())
      throw DomainError("path shorter than the largest lag");
    for (const auto& u : paths[p]) acc.add(p, u);
  }
  return fit_increments(acc.lags(), acc.mean_square(), dt);
}

}  // namespace mvhom
