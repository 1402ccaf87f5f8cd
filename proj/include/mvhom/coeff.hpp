#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <string>

namespace mvhom {

/// Small symmetric matrix of dimension 1 or 2, stored dense.
struct SymMatrix {
  int dim = 1;
  std::array<double, 4> a{};  // row-major

  double operator()(int i, int j) const noexcept { return a[i * dim + j]; }
  double& operator()(int i, int j) noexcept { return a[i * dim + j]; }
  double min_eigenvalue() const noexcept;

  static SymMatrix identity(int dim, double scale = 1.0) noexcept;
};

enum class CoefficientFamily { Constant, Layered, SeparableTrig, Checkerboard };

const char* to_string(CoefficientFamily f) noexcept;
CoefficientFamily parse_family(const std::string& name);  // throws DomainError

/// Parameters of the closed-form families. Which ones matter:
///   constant        a = c I
///   layered         a = (alpha + beta sin 2 pi y1) I
///   separable_trig  a = (alpha + beta sin 2 pi y1)(gamma + delta cos 2 pi tau) I
///   checkerboard    a = (low + (high-low)(1 + s(y1) s(y2))/2) I,
///                   s(t) = tanh(sin(2 pi t) / width); 1D drops s(y2)
struct CoefficientParams {
  double c = 1.0;
  double alpha = 2.0;
  double beta = 1.0;
  double gamma = 2.0;
  double delta = 1.0;
  double low = 1.0;
  double high = 4.0;
  double width = 0.05;
};

/// Space-time periodic, symmetric, uniformly elliptic coefficient field
/// a(y, tau) on the unit cell, with the scaled view a(x/eps, t/eps).
class CoefficientField {
 public:
  /// `kappa` is the declared ellipticity constant; NaN selects the analytic
  /// lower bound of the family.
  CoefficientField(int dim, CoefficientFamily family, CoefficientParams params,
                   double kappa = std::numeric_limits<double>::quiet_NaN());

  static CoefficientField constant(int dim, double c);
  static CoefficientField layered(int dim, double alpha, double beta);
  static CoefficientField separable_trig(int dim, double alpha, double beta, double gamma,
                                         double delta);

  int dim() const noexcept { return dim_; }
  CoefficientFamily family() const noexcept { return family_; }
  const CoefficientParams& params() const noexcept { return params_; }
  double kappa() const noexcept { return kappa_; }
  bool time_dependent() const noexcept { return family_ == CoefficientFamily::SeparableTrig; }

  /// Every family is scalar times identity; this is the scalar.
  double scalar(double y1, double y2, double tau) const noexcept;

  SymMatrix evaluate(double y1, double y2, double tau) const noexcept;
  /// a(frac(x/eps), frac(t/eps)); eps <= 0 throws DomainError.
  SymMatrix evaluate_scaled(double x1, double x2, double t, double eps) const;
  double scalar_scaled(double x1, double x2, double t, double eps) const noexcept;

  /// Copy with every value multiplied by `factor` (and kappa scaled alike).
  CoefficientField scaled(double factor) const;

 private:
  int dim_;
  CoefficientFamily family_;
  CoefficientParams params_;
  double kappa_;
};

/// Lower bound of min-eigenvalue implied by the family parameters.
double analytic_kappa(int dim, CoefficientFamily family, const CoefficientParams& p);

/// Harmonic mean 2ab/(a+b), exactly a when a == b.
inline double harmonic_mean(double a, double b) noexcept {
  return a == b ? a : 2.0 * a * b / (a + b);
}

/// x - floor(x), in [0, 1).
double frac(double x) noexcept;

struct EllipticitySample {
  double kappa_hat;
  double y1, y2, tau;  // arg-min
};

/// Minimum eigenvalue over a uniform lattice of at least `sample_count`
/// points in (y, tau). Throws EllipticityViolation when it falls below the
/// declared kappa by more than 1e-12, DomainError if sample_count < 1000.
EllipticitySample verify_ellipticity(const CoefficientField& field, std::size_t sample_count);

}  // namespace mvhom
