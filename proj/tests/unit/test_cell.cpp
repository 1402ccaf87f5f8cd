#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mvhom/cell.hpp"
#include "mvhom/errors.hpp"

using namespace mvhom;
constexpr double pi = std::numbers::pi;

namespace {

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Independent quadrature oracle for the 1D harmonic mean of 2 + sin(2 pi y).
double harmonic_oracle() {
  const int n = 1 << 16;
  double s = 0;
  for (int i = 0; i < n; ++i) s += 1.0 / (2.0 + std::sin(2 * pi * (i + 0.5) / n));
  return n / s;
}

}  // namespace

TEST_CASE("constant coefficient gives zero correctors") {
  for (int dim : {1, 2}) {
    const auto f = CoefficientField::constant(dim, 2.5);
    const auto sol = solve_cell_problem(f, {dim, 16, 1});
    for (int k = 0; k < dim; ++k)
      for (double v : sol.corrector(0, k)) CHECK(std::abs(v) < 1e-12);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) CHECK(std::abs(sol.tensor()(i, j) - (i == j ? 2.5 : 0.0)) < 1e-10);
  }
}

TEST_CASE("1D layered cell problem") {
  const auto f = CoefficientField::layered(1, 2.0, 1.0);
  const auto sol = solve_cell_problem(f, {1, 256, 1});
  const double at = sol.tensor()(0, 0);
  CHECK(std::abs(harmonic_oracle() - std::sqrt(3.0)) < 1e-12);
  CHECK(std::abs(at / std::sqrt(3.0) - 1.0) <= 5e-4);

  const auto& g = sol.corrector_gradient(0, 0, 0);
  REQUIRE(g.size() == 256);
  double worst = 0;
  for (int i = 0; i < 256; ++i) {
    const double y = (i + 0.5) / 256;
    worst = std::max(worst, std::abs(g[i] - (at / f.scalar(y, 0, 0) - 1.0)));
  }
  CHECK(worst < 1e-3);
  CHECK(std::abs(mean(sol.corrector(0, 0))) < 1e-10);

  double arith = 0, harm = 0;
  for (int i = 0; i < 4096; ++i) {
    const double a = f.scalar((i + 0.5) / 4096, 0, 0);
    arith += a / 4096;
    harm += 1.0 / a / 4096;
  }
  CHECK(1.0 / harm <= at + 1e-6);
  CHECK(at <= arith);
}

TEST_CASE("checkerboard bounds and zero mean") {
  CoefficientParams p;
  p.width = 0.1;
  CoefficientField f(1, CoefficientFamily::Checkerboard, p);
  const auto sol = solve_cell_problem(f, {1, 128, 1});
  double arith = 0, harm = 0;
  for (int i = 0; i < 128; ++i) {
    const double a = f.scalar(i / 128.0, 0, 0);
    arith += a / 128;
    harm += 1.0 / a / 128;
  }
  CHECK(1.0 / harm <= sol.tensor()(0, 0) * (1 + 1e-3));
  CHECK(sol.tensor()(0, 0) <= arith);
  CHECK(std::abs(mean(sol.corrector(0, 0))) < 1e-10);
}

TEST_CASE("2D laminate") {
  const auto f = CoefficientField::layered(2, 2.0, 1.0);
  const auto sol = solve_cell_problem(f, {2, 64, 1});
  const auto& t = sol.tensor();
  CHECK(std::abs(t(0, 0) / std::sqrt(3.0) - 1.0) <= 1e-3);
  CHECK(std::abs(t(1, 1) / 2.0 - 1.0) <= 1e-3);
  CHECK(std::abs(t(0, 1)) < 1e-6);
  CHECK(t(0, 1) == t(1, 0));
  for (int k = 0; k < 2; ++k) CHECK(std::abs(mean(sol.corrector(0, k))) < 1e-10);
  CHECK(sol.stats(0, 0).relative_residual <= 1e-10);
}

TEST_CASE("separable coefficient factors slice by slice") {
  const int S = 8;
  const auto sep = CoefficientField::separable_trig(1, 2.0, 1.0, 2.0, 1.0);
  const auto lay = CoefficientField::layered(1, 2.0, 1.0);
  const auto s_sol = solve_cell_problem(sep, {1, 128, S});
  const auto l_sol = solve_cell_problem(lay, {1, 128, 1});
  const double lay_t = l_sol.tensor()(0, 0);
  for (int s = 0; s < S; ++s) {
    const double g = 2.0 + std::cos(2 * pi * s / S);
    const auto& es = s_sol.corrector(s, 0);
    const auto& el = l_sol.corrector(0, 0);
    for (std::size_t i = 0; i < es.size(); ++i) CHECK(std::abs(es[i] - el[i]) < 1e-8);
    CHECK(s_sol.slice_tensor(s)(0, 0) == doctest::Approx(g * lay_t).epsilon(1e-9));
  }
  // trapezoid average of cos over a full period vanishes
  CHECK(s_sol.tensor()(0, 0) == doctest::Approx(2.0 * lay_t).epsilon(1e-9));
}

TEST_CASE("refinement invariance and scaling equivariance") {
  const auto f = CoefficientField::layered(2, 2.0, 1.0);
  const auto a128 = solve_cell_problem(CoefficientField::layered(1, 2.0, 1.0), {1, 128, 1}).tensor()(0, 0);
  const auto a256 = solve_cell_problem(CoefficientField::layered(1, 2.0, 1.0), {1, 256, 1}).tensor()(0, 0);
  CHECK(std::abs(a256 / a128 - 1.0) <= 2e-3);

  const auto base = solve_cell_problem(f, {2, 32, 1});
  const auto tri = solve_cell_problem(f.scaled(3.0), {2, 32, 1});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(tri.tensor()(i, j) - 3.0 * base.tensor()(i, j)) < 1e-9);
}

TEST_CASE("corrector_gradient reconstruction") {
  const auto c = solve_cell_problem(CoefficientField::constant(2, 1.5), {2, 16, 1});
  const auto r = corrector_gradient(c, {0.3, -0.7}, {0.41, 0.13}, 0.2, 1.0 / 8);
  CHECK(r[0] == 0.3);
  CHECK(r[1] == -0.7);

  const auto f = CoefficientField::layered(1, 2.0, 1.0);
  const auto sol = solve_cell_problem(f, {1, 256, 1});
  const double at = sol.tensor()(0, 0);
  const double eps = 1.0 / 16;
  for (int i = 0; i < 50; ++i) {
    const double x = 0.2 + 0.6 * i / 50.0;
    const auto g = corrector_gradient(sol, {1.0, 0.0}, {x, 0.0}, 0.0, eps);
    CHECK(std::abs(g[0] - at / f.scalar_scaled(x, 0, 0, eps)) < 1e-2);
    const auto z = corrector_gradient(sol, {0.0, 0.0}, {x, 0.0}, 0.0, eps);
    CHECK(z[0] == 0.0);
  }
  CHECK_THROWS_AS(corrector_gradient(sol, {1.0, 0.0}, {0.5, 0.0}, 0.0, 0.0), DomainError);
}

TEST_CASE("cell grid validation and ellipticity propagation") {
  CHECK_THROWS_AS(CellGrid({1, 12, 1}).validate(), DomainError);
  CHECK_THROWS_AS(CellGrid({1, 8, 1}).validate(), DomainError);
  CHECK_THROWS_AS(CellGrid({1, 16, 0}).validate(), DomainError);
  CoefficientParams p;
  p.alpha = 1.0;
  p.beta = 2.0;
  CHECK_THROWS_AS(solve_cell_problem(CoefficientField(1, CoefficientFamily::Layered, p, 0.5), {1, 16, 1}),
                  EllipticityViolation);
}

TEST_CASE("parallel slices reproduce the serial solution") {
  const auto sep = CoefficientField::separable_trig(2, 2.0, 1.0, 2.0, 1.0);
  const auto a = solve_cell_problem(sep, {2, 16, 4}, 1e-10, 1);
  const auto b = solve_cell_problem(sep, {2, 16, 4}, 1e-10, 3);
  CHECK(a.tensor().a == b.tensor().a);
  for (int s = 0; s < 4; ++s) CHECK(a.corrector(s, 1) == b.corrector(s, 1));
}
