#include "mvhom/coeff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/errors.hpp"

namespace mvhom {

double SymMatrix::min_eigenvalue() const noexcept {
  if (dim == 1) return a[0];
  const double tr = a[0] + a[3];
  const double det = a[0] * a[3] - a[1] * a[2];
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  return tr / 2.0 - disc;
}

SymMatrix SymMatrix::identity(int dim, double scale) noexcept {
  SymMatrix m;
  m.dim = dim;
  m(0, 0) = scale;
  if (dim == 2) m(1, 1) = scale;
  return m;
}

const char* to_string(CoefficientFamily f) noexcept {
  switch (f) {
    case CoefficientFamily::Constant: return "constant";
    case CoefficientFamily::Layered: return "layered";
    case CoefficientFamily::SeparableTrig: return "separable_trig";
    case CoefficientFamily::Checkerboard: return "checkerboard";
  }
  return "unknown";
}

CoefficientFamily parse_family(const std::string& name) {
  if (name == "constant") return CoefficientFamily::Constant;
  if (name == "layered") return CoefficientFamily::Layered;
  if (name == "separable_trig") return CoefficientFamily::SeparableTrig;
  if (name == "checkerboard") return CoefficientFamily::Checkerboard;
  throw DomainError("unknown coefficient family '" + name + "'");
}

double frac(double x) noexcept { return x - std::floor(x); }

double analytic_kappa(int dim, CoefficientFamily family, const CoefficientParams& p) {
  (void)dim;
  switch (family) {
    case CoefficientFamily::Constant: return p.c;
    case CoefficientFamily::Layered: return p.alpha - std::abs(p.beta);
    case CoefficientFamily::SeparableTrig: {
      const double f[2] = {p.alpha - std::abs(p.beta), p.alpha + std::abs(p.beta)};
      const double g[2] = {p.gamma - std::abs(p.delta), p.gamma + std::abs(p.delta)};
      double lo = f[0] * g[0];
      for (double x : f)
        for (double y : g) lo = std::min(lo, x * y);
      return lo;
    }
    case CoefficientFamily::Checkerboard: return std::min(p.low, p.high);
  }
  return 0.0;
}

CoefficientField::CoefficientField(int dim, CoefficientFamily family, CoefficientParams params,
                                   double kappa)
    : dim_(dim), family_(family), params_(params), kappa_(kappa) {
  if (dim != 1 && dim != 2) throw DomainError("coefficient dimension must be 1 or 2");
  if (family == CoefficientFamily::Checkerboard && !(params.width > 0.0))
    throw DomainError("checkerboard transition width must be positive");
  if (std::isnan(kappa_)) kappa_ = analytic_kappa(dim, family, params);
  if (!(kappa_ > 0.0)) throw DomainError("declared ellipticity constant must be positive");
}

CoefficientField CoefficientField::constant(int dim, double c) {
  CoefficientParams p;
  p.c = c;
  return {dim, CoefficientFamily::Constant, p};
}

CoefficientField CoefficientField::layered(int dim, double alpha, double beta) {
  CoefficientParams p;
  p.alpha = alpha;
  p.beta = beta;
  return {dim, CoefficientFamily::Layered, p};
}

CoefficientField CoefficientField::separable_trig(int dim, double alpha, double beta,
                                                  double gamma, double delta) {
  CoefficientParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.delta = delta;
  return {dim, CoefficientFamily::SeparableTrig, p};
}

double CoefficientField::scalar(double y1, double y2, double tau) const noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const CoefficientParams& p = params_;
  switch (family_) {
    case CoefficientFamily::Constant: return p.c;
    case CoefficientFamily::Layered: return p.alpha + p.beta * std::sin(two_pi * frac(y1));
    case CoefficientFamily::SeparableTrig:
      return (p.alpha + p.beta * std::sin(two_pi * frac(y1))) *
             (p.gamma + p.delta * std::cos(two_pi * frac(tau)));
    case CoefficientFamily::Checkerboard: {
      double s = std::tanh(std::sin(two_pi * frac(y1)) / p.width);
      if (dim_ == 2) s *= std::tanh(std::sin(two_pi * frac(y2)) / p.width);
      return p.low + (p.high - p.low) * 0.5 * (1.0 + s);
    }
  }
  return 0.0;
}

SymMatrix CoefficientField::evaluate(double y1, double y2, double tau) const noexcept {
  return SymMatrix::identity(dim_, scalar(y1, y2, tau));
}

SymMatrix CoefficientField::evaluate_scaled(double x1, double x2, double t, double eps) const {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  return evaluate(frac(x1 / eps), frac(x2 / eps), frac(t / eps));
}

double CoefficientField::scalar_scaled(double x1, double x2, double t, double eps) const noexcept {
  return scalar(frac(x1 / eps), frac(x2 / eps), frac(t / eps));
}

CoefficientField CoefficientField::scaled(double factor) const {
  if (!(factor > 0.0)) throw DomainError("coefficient scale factor must be positive");
  CoefficientParams p = params_;
  switch (family_) {
    case CoefficientFamily::Constant: p.c *= factor; break;
    case CoefficientFamily::Layered:
    case CoefficientFamily::SeparableTrig:
      p.alpha *= factor;
      p.beta *= factor;
      break;
    case CoefficientFamily::Checkerboard:
      p.low *= factor;
      p.high *= factor;
      break;
  }
  return {dim_, family_, p, kappa_ * factor};
}

EllipticitySample verify_ellipticity(const CoefficientField& field, std::size_t sample_count) {
  if (sample_count < 1000) throw DomainError("ellipticity check needs at least 1000 samples");
  const int axes = field.dim() + (field.time_dependent() ? 1 : 0);
  const auto per_axis = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(sample_count), 1.0 / axes) - 1e-9));
  const std::size_t n1 = per_axis;
  const std::size_t n2 = field.dim() == 2 ? per_axis : 1;
  const std::size_t nt = field.time_dependent() ? per_axis : 1;

  EllipticitySample best{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n1; ++i) {
    const double y1 = static_cast<double>(i) / n1;
    for (std::size_t j = 0; j < n2; ++j) {
      const double y2 = static_cast<double>(j) / n2;
      for (std::size_t s = 0; s < nt; ++s) {
        const double tau = static_cast<double>(s) / nt;
        const double lam = field.evaluate(y1, y2, tau).min_eigenvalue();
        if (lam < best.kappa_hat) best = {lam, y1, y2, tau};
      }
    }
  }
  if (best.kappa_hat < field.kappa() - 1e-12)
    throw EllipticityViolation("coefficient min eigenvalue " + std::to_string(best.kappa_hat) +
                                   " below declared kappa " + std::to_string(field.kappa()),
                               best.y1, best.y2, best.tau, best.kappa_hat);
  return best;
}

}  // namespace mvhom
