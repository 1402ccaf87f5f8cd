#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mvhom/coeff.hpp"

namespace mvhom {

/// Periodic discretization of the unit cell (0,1)^N x (0,1) in tau.
/// Nodes sit at y = i/m; tau-slices at tau_s = s/S.
struct CellGrid {
  int dim = 1;
  int m = 256;     // cells per axis, power of two >= 16
  int slices = 1;  // tau-slices S >= 1

  void validate() const;  // throws DomainError
  std::size_t size() const noexcept;
};

struct CellSolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Correctors eta_k(y, tau_s), one periodic zero-mean field per direction k
/// and slice s, with their forward-difference gradients and the effective
/// tensor.
class CellSolution {
 public:
  const CellGrid& grid() const noexcept { return grid_; }
  const SymMatrix& tensor() const noexcept { return tensor_; }

  /// eta_k on slice s, m^N values row-major.
  const std::vector<double>& corrector(int slice, int k) const { return eta_[index(slice, k)]; }
  /// d eta_k / d y_j on the j-faces (i + e_j / 2) / m of slice s.
  const std::vector<double>& corrector_gradient(int slice, int k, int j) const {
    return grad_[index(slice, k) * grid_.dim + j];
  }
  const CellSolveStats& stats(int slice, int k) const { return stats_[index(slice, k)]; }

  /// d eta_k / d y_j at (y, tau): multilinear on the staggered face grid in
  /// y and linear between neighbouring slices in tau, all periodic.
  double gradient_at(int k, int j, double y1, double y2, double tau) const noexcept;

  /// Local per-slice effective tensor (before tau-averaging).
  const SymMatrix& slice_tensor(int slice) const { return slice_tensor_[slice]; }

 private:
  friend CellSolution solve_cell_problem(const CoefficientField&, const CellGrid&, double, int);
  friend SymMatrix homogenized_tensor(const CellSolution&, const CoefficientField&);

  std::size_t index(int slice, int k) const noexcept {
    return static_cast<std::size_t>(slice) * grid_.dim + k;
  }

  CellGrid grid_;
  std::vector<std::vector<double>> eta_;
  std::vector<std::vector<double>> grad_;
  std::vector<CellSolveStats> stats_;
  std::vector<SymMatrix> slice_tensor_;
  SymMatrix tensor_;
};

/// Solves, for each slice and direction k, the periodic problem
///   sum_ij int a_ij d_i eta_k d_j w = - sum_j int a_jk d_j w   for all periodic w,
/// with zero cell mean, by conjugate gradients on the face-harmonic FD operator
/// with the constant mode projected out every iteration. Verifies ellipticity
/// first (EllipticityViolation propagates); SolverDiverged after 10 m^2
/// iterations.
CellSolution solve_cell_problem(const CoefficientField& field, const CellGrid& grid,
                                double tol = 1e-10, int workers = 1);

/// tau-average of the per-slice effective matrices
///   A_kl = sum_j <a_j (delta_jk + D_j eta_k)(delta_jl + D_j eta_l)>_faces,
/// which equals <a (I + grad eta)>_kl at the discrete solution and is
/// symmetric by construction.
SymMatrix homogenized_tensor(const CellSolution& sol, const CoefficientField& field);

/// grad_x u + sum_i (d u / d x_i) grad_y eta_i at y = frac(x/eps),
/// tau = frac(t/eps). `grad_u` has dim entries.
std::array<double, 2> corrector_gradient(const CellSolution& sol, const std::array<double, 2>& grad_u,
                                         const std::array<double, 2>& x, double t, double eps);

}  // namespace mvhom
