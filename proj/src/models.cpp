#include "mvhom/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvhom/errors.hpp"

namespace mvhom {

// ---- DiffusionOperator -------------------------------------------------------

DiffusionOperator DiffusionOperator::oscillating(const GridSpec& grid, const CoefficientField& field,
                                                 double eps, double t) {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  if (field.dim() != grid.dim()) throw DomainError("coefficient and grid dimensions differ");
  DiffusionOperator op(grid);
  const int n = grid.cells();
  const int m = grid.interior();
  const double h = grid.spacing();
  if (grid.dim() == 1) {
    std::vector<double> a(n + 1);
    for (int j = 0; j <= n; ++j) a[j] = field.scalar_scaled(j * h, 0.0, t, eps);
    op.faces_[0].resize(n);
    for (int f = 0; f < n; ++f) op.faces_[0][f] = harmonic_mean(a[f], a[f + 1]);
    return op;
  }
  // Nodal values on the full (n+1)^2 lattice, ghosts included.
  const int full = n + 1;
  std::vector<double> a(static_cast<std::size_t>(full) * full);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) a[i * full + j] = field.scalar_scaled(i * h, j * h, t, eps);
  op.faces_[0].resize(static_cast<std::size_t>(n) * m);
  op.faces_[1].resize(static_cast<std::size_t>(m) * n);
  for (int f = 0; f < n; ++f)
    for (int j = 0; j < m; ++j)
      op.faces_[0][f * m + j] = harmonic_mean(a[f * full + j + 1], a[(f + 1) * full + j + 1]);
  for (int i = 0; i < m; ++i)
    for (int f = 0; f < n; ++f)
      op.faces_[1][i * n + f] = harmonic_mean(a[(i + 1) * full + f], a[(i + 1) * full + f + 1]);
  return op;
}

DiffusionOperator DiffusionOperator::constant(const GridSpec& grid, const SymMatrix& tensor) {
  if (tensor.dim != grid.dim()) throw DomainError("tensor and grid dimensions differ");
  if (!(tensor.min_eigenvalue() > 0.0)) throw DomainError("diffusion tensor must be positive definite");
  DiffusionOperator op(grid);
  const int n = grid.cells();
  const int m = grid.interior();
  if (grid.dim() == 1) {
    op.faces_[0].assign(n, tensor(0, 0));
    return op;
  }
  op.faces_[0].assign(static_cast<std::size_t>(n) * m, tensor(0, 0));
  op.faces_[1].assign(static_cast<std::size_t>(m) * n, tensor(1, 1));
  const double scale = std::max(std::abs(tensor(0, 0)), std::abs(tensor(1, 1)));
  op.cross_ = std::abs(tensor(0, 1)) > 1e-12 * scale ? tensor(0, 1) : 0.0;
  return op;
}

void DiffusionOperator::apply(std::span<const double> u, std::span<double> out) const {
  const int n = grid_.cells();
  const int m = grid_.interior();
  const double h = grid_.spacing();
  const double inv_h2 = 1.0 / (h * h);
  if (grid_.dim() == 1) {
    const auto& a = faces_[0];
    for (int i = 0; i < m; ++i) {
      const double left = i > 0 ? u[i - 1] : 0.0;
      const double right = i + 1 < m ? u[i + 1] : 0.0;
      out[i] = (a[i] * (u[i] - left) - a[i + 1] * (right - u[i])) * inv_h2;
    }
    return;
  }
  const auto& a0 = faces_[0];
  const auto& a1 = faces_[1];
  auto at = [&](int i, int j) -> double {
    return (i < 0 || j < 0 || i >= m || j >= m) ? 0.0 : u[static_cast<std::size_t>(i) * m + j];
  };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double c = u[static_cast<std::size_t>(i) * m + j];
      double s = a0[i * m + j] * (c - at(i - 1, j)) - a0[(i + 1) * m + j] * (at(i + 1, j) - c);
      s += a1[i * n + j] * (c - at(i, j - 1)) - a1[i * n + j + 1] * (at(i, j + 1) - c);
      if (cross_ != 0.0) {
        const double mixed =
            (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / 4.0;
        s -= 2.0 * cross_ * mixed;
      }
      out[static_cast<std::size_t>(i) * m + j] = s * inv_h2;
    }
}

ScalarField DiffusionOperator::apply(const ScalarField& u) const {
  if (!(u.grid() == grid_)) throw DomainError("field grid differs from operator grid");
  ScalarField out(grid_);
  apply(u.values(), out.values());
  return out;
}

double DiffusionOperator::diagonal(std::size_t idx) const noexcept {
  const int n = grid_.cells();
  const int m = grid_.interior();
  const double h = grid_.spacing();
  if (grid_.dim() == 1) return (faces_[0][idx] + faces_[0][idx + 1]) / (h * h);
  const auto i = static_cast<int>(idx / m), j = static_cast<int>(idx % m);
  return (faces_[0][i * m + j] + faces_[0][(i + 1) * m + j] + faces_[1][i * n + j] +
          faces_[1][i * n + j + 1]) /
         (h * h);
}

ScalarField apply_A_eps(const ScalarField& u, const CoefficientField& field, double eps, double t) {
  return DiffusionOperator::oscillating(u.grid(), field, eps, t).apply(u);
}

// ---- ImplicitSolver ------------------------------------------------------------

ImplicitSolver::ImplicitSolver(DiffusionOperator op, double dt, double tol)
    : op_(std::move(op)), dt_(dt), tol_(tol) {
  if (dt < 0.0) throw DomainError("time step must be nonnegative");
  if (!(tol > 0.0)) throw DomainError("implicit solver tolerance must be positive");
  const GridSpec& g = op_.grid();
  direct_ = g.dim() == 1 && op_.cross() == 0.0;
  if (!direct_) return;
  const int m = g.interior();
  const double h = g.spacing();
  const double r = dt_ / (h * h);
  const auto& a = op_.faces(0);
  upper_.resize(m);
  lower_.resize(m);
  diag_inv_.resize(m);
  for (int i = 0; i < m; ++i) upper_[i] = -r * a[i + 1];  // couples i and i+1
  double cprev = 0.0;
  for (int i = 0; i < m; ++i) {
    const double diag = 1.0 + r * (a[i] + a[i + 1]);
    const double sub = i > 0 ? upper_[i - 1] : 0.0;
    const double denom = diag - sub * cprev;
    diag_inv_[i] = 1.0 / denom;
    cprev = upper_[i] * diag_inv_[i];
    lower_[i] = cprev;
  }
}

ScalarField ImplicitSolver::solve(const ScalarField& rhs) const {
  const GridSpec& g = op_.grid();
  if (!(rhs.grid() == g)) throw DomainError("rhs grid differs from operator grid");
  if (dt_ == 0.0) return rhs;
  const std::size_t size = g.size();
  ScalarField v(g);
  if (direct_) {
    const int m = g.interior();
    auto x = v.values();
    double prev = 0.0;
    for (int i = 0; i < m; ++i) {
      const double sub = i > 0 ? upper_[i - 1] : 0.0;
      prev = (rhs[i] - sub * prev) * diag_inv_[i];
      x[i] = prev;
    }
    for (int i = m - 2; i >= 0; --i) x[i] -= lower_[i] * x[i + 1];
    if (!v.all_finite()) throw NonFinite("implicit solve produced non-finite values");
    return v;
  }

  // Jacobi-preconditioned CG on the SPD matrix I + dt A, warm-started at rhs.
  std::vector<double> diag(size);
  for (std::size_t i = 0; i < size; ++i) diag[i] = 1.0 + dt_ * op_.diagonal(i);
  auto matvec = [&](std::span<const double> x, std::vector<double>& y) {
    op_.apply(x, y);
    for (std::size_t i = 0; i < size; ++i) y[i] = x[i] + dt_ * y[i];
  };
  auto x = v.values();
  std::copy(rhs.values().begin(), rhs.values().end(), x.begin());
  std::vector<double> r(size), z(size), p(size), q(size);
  matvec(x, q);
  double bnorm = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    r[i] = rhs[i] - q[i];
    bnorm += rhs[i] * rhs[i];
  }
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) return ScalarField(g);
  double rz = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    z[i] = r[i] / diag[i];
    p[i] = z[i];
    rz += r[i] * z[i];
  }
  const long max_iter = 10L * static_cast<long>(size);
  for (long it = 0;; ++it) {
    double rr = 0.0;
    for (double ri : r) rr += ri * ri;
    if (std::sqrt(rr) <= tol_ * bnorm) break;
    if (it >= max_iter)
      throw SolverDiverged("implicit CG did not converge", static_cast<int>(it), std::sqrt(rr) / bnorm);
    matvec(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < size; ++i) pq += p[i] * q[i];
    const double alpha = rz / pq;
    double rz_new = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = r[i] / diag[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < size; ++i) p[i] = z[i] + beta * p[i];
  }
  if (!v.all_finite()) throw NonFinite("implicit solve produced non-finite values");
  return v;
}

ScalarField solve_implicit(const ScalarField& rhs, const CoefficientField& field, double eps,
                           double t, double dt, double tol) {
  if (dt < 0.0) throw DomainError("time step must be nonnegative");
  if (dt == 0.0) return rhs;
  return ImplicitSolver(DiffusionOperator::oscillating(rhs.grid(), field, eps, t), dt, tol).solve(rhs);
}

// ---- fluid nonlinearity -----------------------------------------------------------

namespace {

void require_planar(const VectorField& u, const char* what) {
  if (u.grid().dim() != 2 || u.component_count() != 2)
    throw DomainError(std::string(what) + " needs a two-component field on a 2D grid");
}

// Central difference along `axis` with zero ghosts.
ScalarField central_difference(const ScalarField& f, int axis) {
  const GridSpec& g = f.grid();
  const int m = g.interior();
  const double inv2h = 0.5 / g.spacing();
  ScalarField out(g);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const int ip = axis == 0 ? i + 1 : i, im = axis == 0 ? i - 1 : i;
      const int jp = axis == 1 ? j + 1 : j, jm = axis == 1 ? j - 1 : j;
      const double up = (ip < m && jp < m) ? f[static_cast<std::size_t>(ip) * m + jp] : 0.0;
      const double dn = (im >= 0 && jm >= 0) ? f[static_cast<std::size_t>(im) * m + jm] : 0.0;
      out[static_cast<std::size_t>(i) * m + j] = (up - dn) * inv2h;
    }
  return out;
}

double divergence_symbol(const GridSpec& g, int k) {
  return 2.0 * g.cells() * std::sin(k * std::numbers::pi / (2.0 * g.cells()));
}

}  // namespace

ScalarField spectral_divergence(const VectorField& u) {
  require_planar(u, "spectral divergence");
  const GridSpec& g = u.grid();
  const int m = g.interior();
  const auto c1 = sine_coefficients(u[0]);
  const auto c2 = sine_coefficients(u[1]);
  std::vector<double> d(g.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * m + j;
      d[idx] = divergence_symbol(g, i + 1) * c1[idx] + divergence_symbol(g, j + 1) * c2[idx];
    }
  return from_sine_coefficients(g, d);
}

VectorField leray_project(const VectorField& u) {
  require_planar(u, "Leray projection");
  const GridSpec& g = u.grid();
  const int m = g.interior();
  auto c1 = sine_coefficients(u[0]);
  auto c2 = sine_coefficients(u[1]);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * m + j;
      const double s1 = divergence_symbol(g, i + 1), s2 = divergence_symbol(g, j + 1);
      const double proj = (s1 * c1[idx] + s2 * c2[idx]) / (s1 * s1 + s2 * s2);
      c1[idx] -= s1 * proj;
      c2[idx] -= s2 * proj;
    }
  return VectorField({from_sine_coefficients(g, c1), from_sine_coefficients(g, c2)});
}

VectorField apply_B(const VectorField& u, const VectorField& v) {
  require_planar(u, "B");
  require_planar(v, "B");
  const double div = norm_H(spectral_divergence(u));
  if (div > 1e-8 * std::max(1.0, norm_V(u)))
    throw NotDivergenceFree("advecting field is not divergence free", div);
  const GridSpec& g = u.grid();
  VectorField w(g, 2);
  for (int c = 0; c < 2; ++c) {
    for (int d = 0; d < 2; ++d) {
      const ScalarField dv = central_difference(v[c], d);
      ScalarField flux = u[d];
      for (std::size_t i = 0; i < g.size(); ++i) flux[i] *= v[c][i];
      const ScalarField dflux = central_difference(flux, d);
      for (std::size_t i = 0; i < g.size(); ++i) w[c][i] += 0.5 * (u[d][i] * dv[i] + dflux[i]);
    }
  }
  return leray_project(w);
}

// ---- drift / noise ------------------------------------------------------------------

const char* to_string(ModelVariant v) noexcept {
  return v == ModelVariant::AllenCahn ? "allen_cahn" : "navier_stokes_2d";
}

const char* to_string(NoiseLaw l) noexcept {
  return l == NoiseLaw::ScalarMultiplicative ? "scalar_multiplicative" : "mode_modulated";
}

std::optional<std::string> DriftConstants::violation() const {
  if (!(kappa > 0.0)) return "kappa must be positive";
  if (!(eta >= 0.0) || !(eta < kappa / 2.0)) return "eta must satisfy 0 <= eta < kappa/2";
  if (!(ell >= 0.0) || !(ell < (kappa - 2.0 * eta) / 2.0))
    return "ell must satisfy 0 <= ell < (kappa - 2 eta)/2 (local monotonicity budget)";
  return std::nullopt;
}

DiffusionOperator ModelSpec::diffusion(const GridSpec& grid, double t) const {
  if (homogenized) return DiffusionOperator::constant(grid, *homogenized);
  return DiffusionOperator::oscillating(grid, field, eps, t);
}

void ModelSpec::validate(const GridSpec& grid) const {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  if (field.dim() != grid.dim()) throw DomainError("coefficient and grid dimensions differ");
  if (variant == ModelVariant::NavierStokes2D && grid.dim() != 2)
    throw DomainError("the fluid model needs a 2D grid");
  if (auto v = drift.violation()) throw DomainError(*v);
  if (sigma0 < 0.0) throw DomainError("noise intensity sigma0 must be nonnegative");
}

EmpiricalMeasure EmpiricalMeasure::from_members(std::span<const VectorField> members) {
  if (members.empty()) throw DomainError("empirical measure needs at least one member");
  EmpiricalMeasure mu{VectorField(members.front().grid(), members.front().component_count()), 0.0,
                      members.size()};
  for (const auto& u : members) {
    mu.mean += u;
    const double n = norm_H(u);
    mu.second_moment += n * n;
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  mu.mean *= inv;
  mu.second_moment *= inv;
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::dirac(const VectorField& u) {
  const double n = norm_H(u);
  return {u, n * n, 1};
}

ScalarField cubic_reaction(const ScalarField& u) {
  ScalarField out = u;
  for (double& v : out.values()) v = -v * v * v + v;
  return out;
}

VectorField apply_F(const VectorField& u, const EmpiricalMeasure& mu, const ModelSpec& model,
                    double t) {
  (void)t;  // c(t) = xi(t) = 1
  if (mu.count == 0) throw DomainError("empirical measure is empty");
  VectorField out(u.grid(), u.component_count());
  if (model.drag) {
    out += u;
    out -= mu.mean;
  }
  if (model.cubic && model.variant == ModelVariant::AllenCahn)
    for (int c = 0; c < u.component_count(); ++c) out[c] += cubic_reaction(u[c]);
  return out;
}

double noise_sigma(const ModelSpec& model, std::size_t k) noexcept {
  return model.sigma0 / static_cast<double>(k + 1);
}

VectorField apply_G_increment(const VectorField& u, std::span<const double> xi, double dt,
                              const QWienerSpec& noise, const ModelSpec& model) {
  if (xi.size() != noise.modes()) throw DomainError("normal count must equal the mode count");
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  VectorField out = u;
  if (model.noise_law == NoiseLaw::ScalarMultiplicative) {
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k)
      s += std::sqrt(noise.eigenvalues()[k] * dt) * noise_sigma(model, k) * xi[k];
    out *= s;
    return out;
  }
  std::vector<double> weighted(xi.begin(), xi.end());
  for (std::size_t k = 0; k < weighted.size(); ++k) weighted[k] *= noise_sigma(model, k);
  const ScalarField w = increment_from_normals(noise, weighted, dt);
  for (int c = 0; c < out.component_count(); ++c)
    for (std::size_t i = 0; i < w.size(); ++i) out[c][i] *= w[i];
  return out;
}

double hilbert_schmidt_sq(const VectorField& u, const QWienerSpec& noise, const ModelSpec& model) {
  double s = 0.0;
  if (model.noise_law == NoiseLaw::ScalarMultiplicative) {
    const double un = norm_H(u);
    for (std::size_t k = 0; k < noise.modes(); ++k) {
      const double sk = noise_sigma(model, k);
      s += noise.eigenvalues()[k] * sk * sk;
    }
    return s * un * un;
  }
  for (std::size_t k = 0; k < noise.modes(); ++k) {
    const double sk = noise_sigma(model, k);
    VectorField ue = u;
    for (int c = 0; c < ue.component_count(); ++c)
      for (std::size_t i = 0; i < ue.grid().size(); ++i) ue[c][i] *= noise.basis(k)[i];
    const double n = norm_H(ue);
    s += noise.eigenvalues()[k] * sk * sk * n * n;
  }
  return s;
}

FContractReport check_F_contracts(const GridSpec& grid, const ModelSpec& model, std::size_t samples,
                                  std::uint64_t seed, double growth_constant) {
  FContractReport rep;
  rep.samples = samples;
  rep.growth_constant = growth_constant;
  rep.growth_max_violation = -std::numeric_limits<double>::infinity();
  rep.monotone_max_violation = -std::numeric_limits<double>::infinity();
  NoiseStream stream({seed, 0, 0, 0});
  const std::size_t modes = std::min<std::size_t>(grid.size(), 16);
  const int comps = model.components();
  auto random_state = [&](double amplitude) {
    std::vector<ScalarField> cs;
    for (int c = 0; c < comps; ++c) {
      ScalarField f = random_smooth_field(grid, stream, modes);
      f *= amplitude;
      cs.push_back(std::move(f));
    }
    return VectorField(std::move(cs));
  };
  const double tiny = 1e-10;
  for (std::size_t s = 0; s < samples; ++s) {
    // Amplitudes spread over [0.1, 3] so both the quadratic and quartic regimes appear.
    const double amp = 0.1 + 2.9 * stream.uniform_at(s);
    const VectorField u = random_state(amp);
    std::vector<VectorField> members;
    for (int k = 0; k < 4; ++k) members.push_back(random_state(amp));
    const auto mu = EmpiricalMeasure::from_members(members);

    const double uu = norm_H(u) * norm_H(u);
    const double l4 = std::pow(norm_L4(u), 4);
    const double lhs = inner_H(apply_F(u, mu, model, 0.0), u);
    const double rhs = growth_constant * (uu + mu.second_moment) - l4;
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    rep.growth_max_violation = std::max(rep.growth_max_violation, (lhs - rhs) / scale);
    if (uu + mu.second_moment > 0.0)
      rep.growth_fitted = std::max(rep.growth_fitted, (lhs + l4) / (uu + mu.second_moment));

    if (comps == 1 && model.cubic) {
      const VectorField v = random_state(amp);
      const ScalarField d = u[0] - v[0];
      const ScalarField df = cubic_reaction(u[0]) - cubic_reaction(v[0]);
      const double mlhs = inner_H(df, d);
      const double mrhs = norm_H(d) * norm_H(d);
      const double mscale = std::max({1.0, std::abs(mlhs), mrhs});
      rep.monotone_max_violation = std::max(rep.monotone_max_violation, (mlhs - mrhs) / mscale);
    }
  }
  if (rep.growth_max_violation > tiny)
    throw ContractViolation("growth (F(u,mu),u) <= C(|u|^2 + mu(|.|^2)) - |u|_L4^4",
                            rep.growth_max_violation);
  if (rep.monotone_max_violation > tiny)
    throw ContractViolation("monotonicity (F2(u1)-F2(u2), u1-u2) <= |u1-u2|^2",
                            rep.monotone_max_violation);
  if (!std::isfinite(rep.monotone_max_violation)) rep.monotone_max_violation = 0.0;
  return rep;
}

}  // namespace mvhom
