#include "mvhom/cell.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mvhom/errors.hpp"
#include "mvhom/parallel.hpp"

namespace mvhom {

void CellGrid::validate() const {
  if (dim != 1 && dim != 2) throw DomainError("cell dimension must be 1 or 2");
  if (m < 16 || (m & (m - 1)) != 0) throw DomainError("cell grid m must be a power of two >= 16");
  if (slices < 1) throw DomainError("cell grid needs at least one tau-slice");
}

std::size_t CellGrid::size() const noexcept {
  const auto mm = static_cast<std::size_t>(m);
  return dim == 1 ? mm : mm * mm;
}

namespace {

// Face coefficients of one slice: faces[j][i] couples node i to i + e_j.
struct SliceFaces {
  std::vector<double> faces[2];
};

SliceFaces build_faces(const CoefficientField& field, const CellGrid& g, double tau) {
  const int m = g.m;
  const std::size_t size = g.size();
  std::vector<double> nodes(size);
  for (std::size_t idx = 0; idx < size; ++idx) {
    const int i = g.dim == 1 ? static_cast<int>(idx) : static_cast<int>(idx / m);
    const int j = g.dim == 1 ? 0 : static_cast<int>(idx % m);
    nodes[idx] = field.scalar(static_cast<double>(i) / m, static_cast<double>(j) / m, tau);
  }
  SliceFaces out;
  for (int d = 0; d < g.dim; ++d) {
    out.faces[d].resize(size);
    for (std::size_t idx = 0; idx < size; ++idx) {
      std::size_t nb;
      if (g.dim == 1) {
        nb = (idx + 1) % m;
      } else if (d == 0) {
        nb = (idx + m) % size;
      } else {
        nb = (idx / m) * m + (idx % m + 1) % m;
      }
      out.faces[d][idx] = harmonic_mean(nodes[idx], nodes[nb]);
    }
  }
  return out;
}

// Periodic neighbour of idx one step along axis d (+1 or -1).
inline std::size_t shift(const CellGrid& g, std::size_t idx, int d, int step) {
  const auto m = static_cast<std::size_t>(g.m);
  if (g.dim == 1) return (idx + m + step) % m;
  std::size_t i = idx / m, j = idx % m;
  if (d == 0) i = (i + m + step) % m;
  else j = (j + m + step) % m;
  return i * m + j;
}

// y = h^2 L x with L = -sum_j D_j^- (a_j D_j^+ .).
void apply_cell_operator(const CellGrid& g, const SliceFaces& f, const std::vector<double>& x,
                         std::vector<double>& y) {
  const std::size_t size = g.size();
  std::fill(y.begin(), y.end(), 0.0);
  for (int d = 0; d < g.dim; ++d) {
    const auto& a = f.faces[d];
    for (std::size_t idx = 0; idx < size; ++idx) {
      const std::size_t up = shift(g, idx, d, +1);
      const double flux = a[idx] * (x[up] - x[idx]);
      y[idx] -= flux;
      y[up] += flux;
    }
  }
}

void remove_mean(std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

CellSolveStats solve_direction(const CellGrid& g, const SliceFaces& f, int k, double tol,
                               std::vector<double>& eta) {
  const std::size_t size = g.size();
  const double h = 1.0 / g.m;
  // h^2 * D_k^-(a_k), the discrete divergence of a e_k.
  std::vector<double> b(size);
  const auto& ak = f.faces[k];
  for (std::size_t idx = 0; idx < size; ++idx) b[idx] = h * (ak[idx] - ak[shift(g, idx, k, -1)]);
  remove_mean(b);

  eta.assign(size, 0.0);
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) return {};

  std::vector<double> r = b, p = b, q(size);
  double rr = dot(r, r);
  const long max_iter = 10L * g.m * g.m;
  long it = 0;
  while (std::sqrt(rr) > tol * bnorm) {
    if (++it > max_iter)
      throw SolverDiverged("cell CG did not converge in " + std::to_string(max_iter) + " iterations",
                           static_cast<int>(max_iter), std::sqrt(rr) / bnorm);
    apply_cell_operator(g, f, p, q);
    remove_mean(q);
    const double alpha = rr / dot(p, q);
    for (std::size_t i = 0; i < size; ++i) {
      eta[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    remove_mean(r);
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < size; ++i) p[i] = r[i] + beta * p[i];
  }
  remove_mean(eta);

  // True residual of the returned iterate.
  apply_cell_operator(g, f, eta, q);
  double res = 0.0;
  for (std::size_t i = 0; i < size; ++i) res += (b[i] - q[i]) * (b[i] - q[i]);
  return {static_cast<int>(it), std::sqrt(res) / bnorm};
}

std::vector<double> face_gradient(const CellGrid& g, const std::vector<double>& eta, int j) {
  std::vector<double> out(g.size());
  for (std::size_t idx = 0; idx < out.size(); ++idx)
    out[idx] = (eta[shift(g, idx, j, +1)] - eta[idx]) * g.m;
  return out;
}

SymMatrix slice_energy_tensor(const CellGrid& g, const SliceFaces& f,
                              const std::vector<std::vector<double>>& grads /* [k*dim+j] */) {
  SymMatrix t;
  t.dim = g.dim;
  const double w = 1.0 / static_cast<double>(g.size());
  for (int k = 0; k < g.dim; ++k)
    for (int l = k; l < g.dim; ++l) {
      double s = 0.0;
      for (int j = 0; j < g.dim; ++j) {
        const auto& gk = grads[k * g.dim + j];
        const auto& gl = grads[l * g.dim + j];
        const double dk = j == k ? 1.0 : 0.0;
        const double dl = j == l ? 1.0 : 0.0;
        const auto& a = f.faces[j];
        for (std::size_t idx = 0; idx < a.size(); ++idx) s += a[idx] * (dk + gk[idx]) * (dl + gl[idx]);
      }
      t(k, l) = s * w;
      t(l, k) = s * w;
    }
  return t;
}

}  // namespace

CellSolution solve_cell_problem(const CoefficientField& field, const CellGrid& grid, double tol,
                                int workers) {
  grid.validate();
  if (!(tol > 0.0)) throw DomainError("cell solver tolerance must be positive");
  if (field.dim() != grid.dim) throw DomainError("coefficient and cell grid dimensions differ");
  {
    // Dense sampling at 32x the cell-grid density (capped).
    double count = std::pow(32.0 * grid.m, grid.dim);
    if (field.time_dependent()) count *= 32.0 * grid.slices;
    verify_ellipticity(field, static_cast<std::size_t>(std::clamp(count, 1000.0, 4.0e6)));
  }

  CellSolution sol;
  sol.grid_ = grid;
  const int S = grid.slices;
  const int N = grid.dim;
  sol.eta_.resize(static_cast<std::size_t>(S) * N);
  sol.grad_.resize(static_cast<std::size_t>(S) * N * N);
  sol.stats_.resize(static_cast<std::size_t>(S) * N);
  sol.slice_tensor_.resize(S);

  std::vector<SliceFaces> faces(S);
  for (int s = 0; s < S; ++s) faces[s] = build_faces(field, grid, static_cast<double>(s) / S);

  parallel_for(static_cast<std::size_t>(S) * N, workers, [&](std::size_t task) {
    const int s = static_cast<int>(task) / N;
    const int k = static_cast<int>(task) % N;
    auto& eta = sol.eta_[task];
    sol.stats_[task] = solve_direction(grid, faces[s], k, tol, eta);
    for (int j = 0; j < N; ++j) sol.grad_[task * N + j] = face_gradient(grid, eta, j);
  });

  for (int s = 0; s < S; ++s) {
    std::vector<std::vector<double>> grads(sol.grad_.begin() + static_cast<long>(s) * N * N,
                                           sol.grad_.begin() + static_cast<long>(s + 1) * N * N);
    sol.slice_tensor_[s] = slice_energy_tensor(grid, faces[s], grads);
  }
  sol.tensor_ = homogenized_tensor(sol, field);
  return sol;
}

SymMatrix homogenized_tensor(const CellSolution& sol, const CoefficientField& field) {
  if (field.dim() != sol.grid_.dim) throw DomainError("coefficient and cell solution dimensions differ");
  // Periodic trapezoid in tau is the plain slice average.
  SymMatrix t;
  t.dim = sol.grid_.dim;
  for (const auto& st : sol.slice_tensor_)
    for (std::size_t i = 0; i < 4; ++i) t.a[i] += st.a[i];
  for (double& v : t.a) v /= static_cast<double>(sol.slice_tensor_.size());
  return t;
}

double CellSolution::gradient_at(int k, int j, double y1, double y2, double tau) const noexcept {
  const int m = grid_.m;
  const int S = grid_.slices;
  auto locate = [m](double y, double offset, int& i0, double& w) {
    const double u = frac(y) * m - offset;
    const double fl = std::floor(u);
    w = u - fl;
    i0 = ((static_cast<int>(fl) % m) + m) % m;
  };
  int i0, j0 = 0;
  double wi, wj = 0.0;
  locate(y1, j == 0 ? 0.5 : 0.0, i0, wi);
  if (grid_.dim == 2) locate(y2, j == 1 ? 0.5 : 0.0, j0, wj);

  auto sample = [&](int s) {
    const auto& g = grad_[index(s, k) * grid_.dim + j];
    if (grid_.dim == 1) {
      const int i1 = (i0 + 1) % m;
      return (1.0 - wi) * g[i0] + wi * g[i1];
    }
    const int i1 = (i0 + 1) % m, j1 = (j0 + 1) % m;
    auto at = [&](int a, int b) { return g[static_cast<std::size_t>(a) * m + b]; };
    return (1.0 - wi) * ((1.0 - wj) * at(i0, j0) + wj * at(i0, j1)) +
           wi * ((1.0 - wj) * at(i1, j0) + wj * at(i1, j1));
  };
  if (S == 1) return sample(0);
  const double u = frac(tau) * S;
  const int s0 = static_cast<int>(std::floor(u)) % S;
  const double wt = u - std::floor(u);
  return (1.0 - wt) * sample(s0) + wt * sample((s0 + 1) % S);
}

std::array<double, 2> corrector_gradient(const CellSolution& sol, const std::array<double, 2>& grad_u,
                                         const std::array<double, 2>& x, double t, double eps) {
  if (!(eps > 0.0)) throw DomainError("scale parameter eps must be positive");
  const int N = sol.grid().dim;
  const double y1 = frac(x[0] / eps);
  const double y2 = N == 2 ? frac(x[1] / eps) : 0.0;
  const double tau = frac(t / eps);
  std::array<double, 2> out{};
  for (int j = 0; j < N; ++j) {
    double g = grad_u[j];
    for (int i = 0; i < N; ++i) g += grad_u[i] * sol.gradient_at(i, j, y1, y2, tau);
    out[j] = g;
  }
  return out;
}

}  // namespace mvhom
