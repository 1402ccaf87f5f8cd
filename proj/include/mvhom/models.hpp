#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvhom/coeff.hpp"
#include "mvhom/grid.hpp"
#include "mvhom/noise.hpp"

namespace mvhom {

// ---- diffusion operator -----------------------------------------------------

/// Conservative second-order FD form of -div(a grad u) with Dirichlet ghost
/// zeros. Face coefficients are harmonic averages of the nodal values on
/// either side (ghost nodes included); a constant tensor may add a
/// cross-derivative term.
class DiffusionOperator {
 public:
  /// a(x/eps, t/eps) frozen at time t.
  static DiffusionOperator oscillating(const GridSpec& grid, const CoefficientField& field,
                                       double eps, double t);
  /// Constant symmetric tensor (the homogenized operator).
  static DiffusionOperator constant(const GridSpec& grid, const SymMatrix& tensor);

  const GridSpec& grid() const noexcept { return grid_; }
  /// Faces along `axis`: 1D has n faces, face f joins nodes f-1 and f.
  /// 2D axis 0 stores n x (n-1) faces, axis 1 stores (n-1) x n.
  const std::vector<double>& faces(int axis) const noexcept { return faces_[axis]; }
  double cross() const noexcept { return cross_; }

  void apply(std::span<const double> u, std::span<double> out) const;
  ScalarField apply(const ScalarField& u) const;

  /// Diagonal entry of the stencil at node idx.
  double diagonal(std::size_t idx) const noexcept;

 private:
  explicit DiffusionOperator(const GridSpec& grid) : grid_(grid) {}

  GridSpec grid_;
  std::vector<double> faces_[2];
  double cross_ = 0.0;  // coefficient of -2 d1 d2
};

ScalarField apply_A_eps(const ScalarField& u, const CoefficientField& field, double eps, double t);

/// Solver for (I + dt A) v = rhs with a fixed operator. 1D without a cross
/// term uses an exact tridiagonal factorization; otherwise Jacobi-PCG to
/// relative residual tol.
class ImplicitSolver {
 public:
  ImplicitSolver(DiffusionOperator op, double dt, double tol = 1e-12);

  const DiffusionOperator& op() const noexcept { return op_; }
  double dt() const noexcept { return dt_; }

  ScalarField solve(const ScalarField& rhs) const;

 private:
  DiffusionOperator op_;
  double dt_, tol_;
  bool direct_ = false;
  std::vector<double> lower_, diag_inv_, upper_;  // Thomas factors
};

/// v with (I + dt A^eps(t)) v = rhs. dt = 0 returns rhs; dt < 0 DomainError.
ScalarField solve_implicit(const ScalarField& rhs, const CoefficientField& field, double eps,
                           double t, double dt, double tol = 1e-12);

// ---- fluid nonlinearity -------------------------------------------------------

/// Divergence in the sine basis: per mode, s1 u1_k + s2 u2_k with
/// s_d = (2/h) sin(k_d pi h / 2), the symbol of the one-sided difference.
ScalarField spectral_divergence(const VectorField& u);

/// Orthogonal projection onto fields with zero spectral divergence
/// (per-mode u - s (s.u)/|s|^2). Self-adjoint in H.
VectorField leray_project(const VectorField& u);

/// P[(u.grad)v + div(u (x) v)]/2 with central differences; skew in v, so
/// (B(u,v), v) = 0 to round-off for projected v. Requires a 2D two-component
/// u with spectral divergence <= 1e-8 max(1, |u|_V), else NotDivergenceFree.
VectorField apply_B(const VectorField& u, const VectorField& v);

// ---- drift and noise intensity ------------------------------------------------

enum class ModelVariant { AllenCahn, NavierStokes2D };
enum class NoiseLaw { ScalarMultiplicative, ModeModulated };

const char* to_string(ModelVariant v) noexcept;
const char* to_string(NoiseLaw l) noexcept;

/// Constant budget of the local monotonicity condition: eta < kappa/2 and
/// ell < (kappa - 2 eta)/2.
struct DriftConstants {
  double kappa = 1.0;
  double eta = 0.1;
  double ell = 0.1;

  /// Empty when admissible, otherwise the violated inequality.
  std::optional<std::string> violation() const;
};

struct ModelSpec {
  ModelVariant variant = ModelVariant::AllenCahn;
  CoefficientField field = CoefficientField::constant(1, 1.0);
  double eps = 1.0;
  /// When set, A is this constant tensor instead of a(x/eps, t/eps).
  std::optional<SymMatrix> homogenized;
  bool drag = true;
  bool cubic = true;
  DriftConstants drift;
  NoiseLaw noise_law = NoiseLaw::ScalarMultiplicative;
  double sigma0 = 0.1;

  bool has_B() const noexcept { return variant == ModelVariant::NavierStokes2D; }
  int components() const noexcept { return variant == ModelVariant::NavierStokes2D ? 2 : 1; }
  bool time_dependent_operator() const noexcept {
    return !homogenized && field.time_dependent();
  }
  DiffusionOperator diffusion(const GridSpec& grid, double t) const;
  /// Throws DomainError on an inadmissible spec.
  void validate(const GridSpec& grid) const;
};

/// Empirical law of an ensemble, summarized by its mean field and second
/// moment (1/M) sum |u_m|_H^2.
struct EmpiricalMeasure {
  VectorField mean;
  double second_moment = 0.0;
  std::size_t count = 0;

  static EmpiricalMeasure from_members(std::span<const VectorField> members);
  static EmpiricalMeasure dirac(const VectorField& u);
};

/// Stokes drag u - mean(mu) pointwise, plus -u^3 + u when the cubic is on.
VectorField apply_F(const VectorField& u, const EmpiricalMeasure& mu, const ModelSpec& model,
                    double t);
ScalarField cubic_reaction(const ScalarField& u);

/// sigma_k = sigma0 / k.
double noise_sigma(const ModelSpec& model, std::size_t k) noexcept;

/// G(u) dW for per-mode normals xi:
///   scalar_multiplicative:  (sum_k sqrt(lambda_k dt) sigma_k xi_k) u
///   mode_modulated:         sum_k sqrt(lambda_k dt) sigma_k xi_k (u e_k)
VectorField apply_G_increment(const VectorField& u, std::span<const double> xi, double dt,
                              const QWienerSpec& noise, const ModelSpec& model);

/// |G(u)|^2 in the Hilbert-Schmidt proxy sum_k lambda_k |G(u) e_k-part|_H^2.
double hilbert_schmidt_sq(const VectorField& u, const QWienerSpec& noise, const ModelSpec& model);

struct FContractReport {
  std::size_t samples = 0;
  double growth_constant = 0.0;       // C used for the growth inequality
  double growth_fitted = 0.0;         // smallest C that would pass the batch
  double growth_max_violation = 0.0;  // max(lhs - rhs), <= 0 when satisfied
  double monotone_max_violation = 0.0;
};

/// Evaluates, on `samples` random fields and random M-member measures,
///   growth:     (F(u,mu), u) <= C(|u|^2 + mu(|.|^2)) - |u|_L4^4
///   monotone:   (F2(u1) - F2(u2), u1 - u2) <= |u1 - u2|^2
/// and throws ContractViolation when either exceeds 1e-10 of its scale.
/// The default C = 5/2 follows from |(mean, u)| <= (|mean|^2 + |u|^2)/2 and
/// Jensen.
FContractReport check_F_contracts(const GridSpec& grid, const ModelSpec& model, std::size_t samples,
                                  std::uint64_t seed, double growth_constant = 2.5);

}  // namespace mvhom
