#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mvhom/ensemble.hpp"
#include "mvhom/models.hpp"
#include "mvhom/noise.hpp"

namespace mvhom {

struct StepperConfig {
  double dt = 1e-4;
  double horizon = 0.25;
  double tol = 1e-12;      // implicit solver relative residual
  long max_steps = 10'000'000;
  int moment_order = 4;    // p >= 2

  /// T / dt, rounded; DomainError unless it is integral within 1e-9.
  long steps() const;
  void validate() const;
};

/// Initial data shared by every eps-level. `sine`: amplitude prod_d sin(pi x_d)
/// (two shifted modes for the fluid model, then projected); `random`: a
/// smooth random field keyed by the member index. `spread` scales member m by
/// 1 + spread (m/(M-1) - 1/2).
struct InitialCondition {
  std::string shape = "sine";
  double amplitude = 1.0;
  double spread = 0.0;
  std::uint64_t seed = 0;

  VectorField make(const GridSpec& grid, const ModelSpec& model, std::size_t member,
                   std::size_t members) const;
};

/// Everything needed to advance one ensemble: a fully resolved run setup.
struct Simulation {
  GridSpec grid{1, 64};
  ModelSpec model;
  QWienerSpec noise{GridSpec{1, 64}, 0, 1.0, 2.0, 0};
  StepperConfig stepper;
  InitialCondition initial;
  std::size_t members = 1;
  bool common_noise = false;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint32_t level = 0;
  int workers = 1;
};

// ---- energy ledger ------------------------------------------------------------

struct LedgerRecord {
  long step = 0;
  double t = 0.0;
  double H2 = 0.0;           // |u|_H^2
  double Hp = 0.0;           // |u|_H^p
  double V2 = 0.0;           // |grad u|^2
  double L4 = 0.0;           // |u|_L4^4
  double dissipation = 0.0;  // cumulative sum dt |grad u|^2
  double quartic = 0.0;      // cumulative sum dt |u|_L4^4
  double drift_work = 0.0;   // cumulative sum dt (F, u)
  double noise_work = 0.0;   // cumulative sum (G dW, u)
};

class EnergyLedger {
 public:
  explicit EnergyLedger(int moment_order = 2) : p_(moment_order) {}

  int moment_order() const noexcept { return p_; }
  const std::vector<LedgerRecord>& records() const noexcept { return records_; }

  /// Appends the state after `step`; work terms are the increments of this step.
  void record(long step, double t, double dt, const VectorField& u, double drift_work,
              double noise_work);

  /// sup_t |u|^2 + sum dt (|grad u|^2 + |u|_L4^4) over the recorded steps.
  double energy_functional() const noexcept;
  /// sup_t |u|^p + sum dt |u|^(p-2) (|grad u|^2 + |u|_L4^4).
  double moment_functional() const noexcept;

  /// Columns: step,t,H2,Hp,V2,L4,dissipation.
  void write_csv(std::ostream& out) const;

 private:
  int p_;
  double dt_ = 0.0;
  std::vector<LedgerRecord> records_;
};

/// Ledger CSV: header step,t,H2,Hp,V2,L4,dissipation, values at %.17g.
void write_ledger_csv(std::ostream& out, std::span<const LedgerRecord> records);

// ---- stepping -------------------------------------------------------------------

/// Semi-implicit Euler-Maruyama stepper: A^eps implicit (frozen at t_n),
/// B, F and G explicit. Caches the implicit factorization when the operator
/// does not depend on time.
class Stepper {
 public:
  Stepper(const GridSpec& grid, const ModelSpec& model, const QWienerSpec& noise,
          const StepperConfig& config);

  const ModelSpec& model() const noexcept { return model_; }
  const QWienerSpec& noise() const noexcept { return noise_; }
  const StepperConfig& config() const noexcept { return config_; }

  /// Solver for (I + dt A(t)); shared and immutable.
  std::shared_ptr<const ImplicitSolver> solver_at(double t) const;

  struct Work {
    double drift = 0.0;  // dt (F(u), u)
    double noise = 0.0;  // (G(u) dW, u)
  };

  /// One step from u at time t with per-mode normals xi. Throws StepRejected
  /// if dt (|u|_inf / h + reaction bound) > 0.5, NonFinite on NaN/Inf.
  VectorField advance(const VectorField& u, const EmpiricalMeasure& mu, std::span<const double> xi,
                      double t, const ImplicitSolver& solver, Work* work = nullptr) const;

  double step_guard(const VectorField& u) const noexcept;

 private:
  GridSpec grid_;
  ModelSpec model_;
  QWienerSpec noise_;
  StepperConfig config_;
  std::shared_ptr<const ImplicitSolver> fixed_solver_;
};

/// Single step drawing K normals from `stream`.
VectorField step(const VectorField& u, const Stepper& stepper, const EmpiricalMeasure& mu,
                 NoiseStream& stream, double t);

/// Called after every completed step with the step index and the ensemble.
using StepObserver = std::function<void(long step, const Ensemble& ensemble)>;

struct EnsembleRun {
  Ensemble final;
  std::vector<EnergyLedger> ledgers;
};

/// Advances every member to the horizon, refreshing the empirical measure
/// before each step. Ledgers hold the initial state as step 0.
EnsembleRun run_ensemble(Ensemble ensemble, const Simulation& sim,
                         const StepObserver& observer = {});

/// Builds the initial ensemble of `sim` (initial data and stream keys).
Ensemble initial_ensemble(const Simulation& sim);

// ---- increment scaling ------------------------------------------------------------

struct IncrementFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;
  std::vector<long> lags;
  std::vector<double> mean_square;  // E |u(t+lag) - u(t)|^2_{H^-1}, per lag
};

/// Streaming pooled increments: feed the states of every path in step order;
/// each new state is paired with the one `lag` steps earlier. Memory is one
/// window of max(lag) + 1 states per path.
class IncrementAccumulator {
 public:
  /// Needs >= 4 distinct positive lags with max/min >= 10 (DomainError).
  IncrementAccumulator(const std::vector<long>& lags, std::size_t paths);
  void add(std::size_t path, const VectorField& u);
  const std::vector<long>& lags() const noexcept { return lags_; }  // sorted
  /// Pooled E |u(t+lag) - u(t)|^2_{H^-1}; DomainError if a lag saw no pair.
  std::vector<double> mean_square() const;
 private:
  std::vector<long> lags_;
  std::size_t window_;
  std::vector<std::vector<std::vector<double>>> ring_;  // [path][slot] coordinates
  std::vector<long> seen_;
  std::vector<double> sum_, count_;
};

/// Least-squares fit of log mean_square against log(lag dt); degenerate
/// (NaN slope) when any mean square vanishes.
IncrementFit fit_increments(const std::vector<long>& lags, const std::vector<double>& mean_square, double dt);

/// Least-squares slope of log mean-square H^-1-proxy increments against log
/// lag, pooled over paths and start times. `paths[p][n]` is the state after n
/// steps. Needs >= 4 lags with max/min >= 10 (DomainError otherwise).
IncrementFit increment_scaling(const std::vector<std::vector<VectorField>>& paths,
                               const std::vector<long>& lags, double dt);

}  // namespace mvhom
