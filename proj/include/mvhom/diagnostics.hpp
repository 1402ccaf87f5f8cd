#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvhom/cell.hpp"
#include "mvhom/integrator.hpp"

namespace mvhom {

// ---- two-scale pairing ------------------------------------------------------------

/// Separable test function psi(x, t, y, tau) = w(x, t) phi(y, tau).
struct PairingTest {
  std::function<double(double x1, double x2, double t)> w = [](double, double, double) { return 1.0; };
  std::function<double(double y1, double y2, double tau)> phi = [](double, double, double) { return 1.0; };
  /// Neither factor depends on time: weights are tabulated once.
  bool stationary = true;
};

/// Running quadrature of int int u(x,t) w(x,t) phi(x/eps, t/eps): midpoint in
/// x, left-point in t (add the state at t_n with the step dt).
class PairingAccumulator {
 public:
  PairingAccumulator(const GridSpec& grid, PairingTest test, double eps, int component = 0);

  void add(const VectorField& u, double t, double dt);
  double value() const noexcept { return sum_; }

 private:
  void tabulate(double t);

  GridSpec grid_;
  PairingTest test_;
  double eps_;
  int component_;
  std::vector<double> weights_;
  double sum_ = 0.0;
};

/// Pairing over a trajectory sampled at every step; trajectory[n] is the
/// state at n dt, and the last state only closes the final interval.
double two_scale_pairing(std::span<const VectorField> trajectory, double dt, const PairingTest& test,
                         double eps, int component = 0);

// ---- corrector residuals ----------------------------------------------------------

struct GradientResiduals {
  double plain_sq = 0.0;      // |grad u_eps - grad u_hom|^2
  double corrected_sq = 0.0;  // |grad u_eps - (grad u_hom + (grad u_hom . D) eta)|^2
  double term_sq = 0.0;       // |(grad u_hom . D) eta|^2, the reconstruction term
};

/// Evaluates the two-scale reconstruction of grad u^eps on the faces of the
/// macroscopic grid: the face-normal derivative is the one-sided difference,
/// the tangential ones average the neighbouring central differences, and the
/// corrector gradient is interpolated from the cell grid.
class CorrectorReconstruction {
 public:
  CorrectorReconstruction(const GridSpec& grid, const CellSolution& cell, double eps);

  /// Spatial squared residuals at time t (h^N-weighted face sums).
  GradientResiduals residuals(const ScalarField& u_eps, const ScalarField& u_hom, double t) const;

 private:
  using Tables = std::vector<std::vector<double>>;  // [j * N + i][face]
  Tables tabulate(double t) const;

  GridSpec grid_;
  const CellSolution* cell_;
  double eps_;
  bool stationary_;
  Tables fixed_;
};

struct CorrectorResidual {
  double plain = 0.0;
  double corrected = 0.0;
  double term = 0.0;  // bound on corrected - plain by the triangle inequality
};

/// Space-time L2 residuals sqrt(E sum_{n>=1} dt |.|^2) over paths;
/// eps_paths[p][n] and hom_paths[p][n] are the states at n dt.
CorrectorResidual corrector_residual(const std::vector<std::vector<VectorField>>& eps_paths,
                                     const std::vector<std::vector<VectorField>>& hom_paths,
                                     const CellSolution& cell, double eps, double dt);

// ---- eps-ladder -------------------------------------------------------------------

struct LadderConfig {
  /// Grid, model (field, drag, cubic, noise law), noise, stepper, initial
  /// data, ensemble size, seed and worker count. model.eps is ignored.
  Simulation base;
  std::vector<double> eps;  // strictly decreasing
  std::size_t replicas = 1;
  CellGrid cell{1, 256, 1};
  double cell_tol = 1e-10;

  void validate() const;  // DomainError
};

/// Everything the report is derived from. Levels are the eps values in
/// order followed by the homogenized run; per-replica values are member means.
struct LadderRaw {
  std::vector<double> eps;
  std::size_t replicas = 0, members = 0;
  long steps = 0;
  double dt = 0.0;
  int moment_order = 2;
  SymMatrix tensor;

  struct Level {
    std::vector<double> error_sq;      // sum_n dt |u - u_hom|^2, per replica
    std::vector<double> plain_sq;      // gradient residuals, per replica
    std::vector<double> corrected_sq;
    std::vector<double> term_sq;
    std::vector<double> energy;        // energy functional, per replica
    std::vector<double> moment;        // p-th moment functional, per replica
    std::vector<double> pairing;       // phi = sin(2 pi y1), w = 1, per replica
    std::vector<double> final_norm;    // |u(T)|_H, replica-major, R * M
    std::vector<double> mean_H2;       // E |u(t_n)|^2 over replicas and members
    std::vector<double> mean_Hp;       // E |u(t_n)|^p
  };
  std::vector<Level> levels;  // eps.size() + 1
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

struct LevelReport {
  double eps = 0.0;  // 0 for the homogenized run
  Estimate error, plain, corrected, term, energy, moment, pairing;
  double sup_mean_H2 = 0.0;
  double sup_mean_Hp = 0.0;
  double w2_final_norm = 0.0;  // W2 of |u(T)|_H against the homogenized run
};

struct ConvergenceReport {
  std::vector<double> eps;
  std::size_t replicas = 0, members = 0;
  long steps = 0;
  double dt = 0.0;
  int moment_order = 2;
  SymMatrix tensor;
  std::vector<LevelReport> levels;  // eps levels only
  LevelReport homogenized;
  std::string coupling;  // how the eps levels were coupled
};

/// Runs the homogenized problem and every eps-level on identical initial data
/// and identical noise per (replica, member), stepping all levels in lockstep.
LadderRaw run_ladder(const LadderConfig& config, const CellSolution& cell);
LadderRaw run_ladder(const LadderConfig& config);

/// Sample means, standard errors and the observable-level W2 check.
ConvergenceReport assemble_report(const LadderRaw& raw);

inline ConvergenceReport ladder(const LadderConfig& config) { return assemble_report(run_ladder(config)); }

}  // namespace mvhom
