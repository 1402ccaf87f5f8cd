#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mvhom/ensemble.hpp"
#include "mvhom/errors.hpp"
#include "mvhom/integrator.hpp"

using namespace mvhom;
constexpr double pi = std::numbers::pi;

namespace {

// Heat equation with every forcing switched off.
Simulation heat(int n = 32) {
  auto sim = test::small_simulation(1, 0.0);
  sim.grid = GridSpec(1, n);
  sim.noise = QWienerSpec(sim.grid, 8, 1.0, 2.0, 17);
  sim.model.field = CoefficientField::constant(1, 1.0);
  sim.model.drag = false;
  sim.model.cubic = false;
  return sim;
}

std::vector<VectorField> single_path(const Simulation& sim, std::size_t member = 0) {
  std::vector<VectorField> path;
  auto ens = initial_ensemble(sim);
  path.push_back(ens.members[member]);
  run_ensemble(ens, sim, [&](long, const Ensemble& e) { path.push_back(e.members[member]); });
  return path;
}

}  // namespace

TEST_CASE("stepper configuration") {
  StepperConfig c;
  c.dt = 1e-3;
  c.horizon = 0.05;
  CHECK(c.steps() == 50);
  c.horizon = 0.0505;
  CHECK_THROWS_AS(c.steps(), DomainError);
  StepperConfig bad;
  bad.moment_order = 1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = StepperConfig{};
  bad.dt = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("unforced heat equation decays geometrically") {
  auto sim = heat();
  sim.initial.shape = "sine";
  const auto path = single_path(sim);
  const double h = sim.grid.spacing();
  const double mu1 = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
  const double r = 1.0 / (1.0 + sim.stepper.dt * mu1);
  for (std::size_t n = 0; n < path.size(); ++n)
    for (std::size_t i = 0; i < sim.grid.size(); ++i)
      CHECK(std::abs(path[n][0][i] - std::pow(r, n) * path[0][0][i]) <= 1e-12);
}

TEST_CASE("implicit step is a contraction and satisfies the energy identity") {
  auto sim = heat();
  sim.model.field = CoefficientField::layered(1, 2.0, 1.0);
  sim.initial.shape = "random";
  const auto path = single_path(sim);
  const double dt = sim.stepper.dt;
  for (std::size_t n = 0; n + 1 < path.size(); ++n) {
    CHECK(norm_H(path[n + 1]) <= norm_H(path[n]));
    // |v|^2 - |u|^2 = -2 dt (A v, v) - dt^2 |A v|^2 for v = (I + dt A)^-1 u
    const auto av = apply_A_eps(path[n + 1][0], sim.model.field, sim.model.eps, n * dt);
    const double lhs = std::pow(norm_H(path[n + 1]), 2) - std::pow(norm_H(path[n]), 2);
    const double rhs = -2 * dt * inner_H(av, path[n + 1][0]) - dt * dt * std::pow(norm_H(av), 2);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::pow(norm_H(path[n]), 2));
  }
}

TEST_CASE("trajectories and ledgers are bitwise reproducible") {
  auto sim = test::small_simulation(4);
  sim.initial.shape = "random";
  const auto a = run_ensemble(initial_ensemble(sim), sim);
  auto par = sim;
  par.workers = 3;
  const auto b = run_ensemble(initial_ensemble(par), par);
  for (std::size_t m = 0; m < 4; ++m) {
    CHECK(a.final.members[m] == b.final.members[m]);
    std::ostringstream x, y;
    a.ledgers[m].write_csv(x);
    b.ledgers[m].write_csv(y);
    CHECK(x.str() == y.str());
  }
  auto other = sim;
  other.seed = 18;
  CHECK_FALSE(run_ensemble(initial_ensemble(other), other).final.members[0] == a.final.members[0]);
}

TEST_CASE("single member drag is exactly zero") {
  auto on = test::small_simulation(1);
  auto off = on;
  off.model.drag = false;
  const auto a = run_ensemble(initial_ensemble(on), on);
  const auto b = run_ensemble(initial_ensemble(off), off);
  CHECK(a.final.members[0] == b.final.members[0]);
}

TEST_CASE("common noise keeps identical members identical") {
  auto sim = test::small_simulation(2);
  sim.common_noise = true;
  const auto run = run_ensemble(initial_ensemble(sim), sim);
  CHECK(run.final.members[0] == run.final.members[1]);
  sim.common_noise = false;
  const auto indep = run_ensemble(initial_ensemble(sim), sim);
  CHECK_FALSE(indep.final.members[0] == indep.final.members[1]);
}

TEST_CASE("energy ledger") {
  auto sim = test::small_simulation(2);
  sim.stepper.moment_order = 4;
  const auto run = run_ensemble(initial_ensemble(sim), sim);
  const auto& recs = run.ledgers[0].records();
  REQUIRE(recs.size() == 51);
  CHECK(recs.front().step == 0);
  CHECK(recs.back().t == doctest::Approx(0.05));
  for (std::size_t n = 1; n < recs.size(); ++n) {
    CHECK(recs[n].dissipation >= recs[n - 1].dissipation);
    CHECK(recs[n].quartic >= recs[n - 1].quartic);
    CHECK(recs[n].Hp == doctest::Approx(recs[n].H2 * recs[n].H2));
    CHECK(std::isfinite(recs[n].noise_work));
  }
  CHECK(std::isfinite(run.ledgers[0].energy_functional()));
  CHECK(run.ledgers[0].energy_functional() >= recs.front().H2);
  CHECK(std::isfinite(run.ledgers[0].moment_functional()));
  std::ostringstream csv;
  run.ledgers[0].write_csv(csv);
  CHECK(csv.str().rfind("step,t,H2,Hp,V2,L4,dissipation\n", 0) == 0);
}

TEST_CASE("step guard rejects oversized steps") {
  auto sim = test::small_simulation(1);
  sim.stepper.dt = 0.2;
  sim.stepper.horizon = 0.2;
  sim.initial.amplitude = 3.0;
  CHECK_THROWS_AS(run_ensemble(initial_ensemble(sim), sim), StepRejected);
}

TEST_CASE("increment scaling") {
  const std::vector<long> lags{1, 2, 4, 8, 16};
  SUBCASE("smooth decay path has slope two") {
    auto sim = heat(64);
    sim.stepper.dt = 1e-4;
    sim.stepper.horizon = 0.01;
    const auto fit = increment_scaling({single_path(sim)}, lags, sim.stepper.dt);
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(fit.mean_square.size() == lags.size());
  }
  SUBCASE("noise dominated paths have slope near one") {
    auto sim = test::small_simulation(16, 1.0);
    sim.model.field = CoefficientField::constant(1, 1e-6);
    sim.model.drift.kappa = 1e-6;
    sim.model.drift.eta = 0.0;
    sim.model.drift.ell = 0.0;
    sim.model.drag = false;
    sim.model.cubic = false;
    sim.stepper.dt = 1e-3;
    sim.stepper.horizon = 0.1;
    std::vector<std::vector<VectorField>> paths(sim.members);
    auto ens = initial_ensemble(sim);
    for (std::size_t m = 0; m < sim.members; ++m) paths[m].push_back(ens.members[m]);
    run_ensemble(ens, sim, [&](long, const Ensemble& e) {
      for (std::size_t m = 0; m < e.size(); ++m) paths[m].push_back(e.members[m]);
    });
    const auto fit = increment_scaling(paths, lags, sim.stepper.dt);
    CHECK(fit.slope >= 0.7);
    CHECK(fit.slope <= 1.3);
  }
  SUBCASE("zero path is degenerate") {
    GridSpec g(1, 16);
    std::vector<VectorField> zero(40, VectorField(g, 1));
    const auto fit = increment_scaling({zero}, lags, 1e-3);
    CHECK(fit.degenerate);
    CHECK(std::isnan(fit.slope));
  }
  SUBCASE("lag set validation") {
    GridSpec g(1, 16);
    std::vector<VectorField> zero(40, VectorField(g, 1));
    CHECK_THROWS_AS(increment_scaling({zero}, {1, 2, 4}, 1e-3), DomainError);
    CHECK_THROWS_AS(increment_scaling({zero}, {1, 2, 3, 4}, 1e-3), DomainError);
    CHECK_THROWS_AS(increment_scaling({zero}, {1, 1, 4, 16}, 1e-3), DomainError);
  }
}

TEST_CASE("fluid model keeps the state divergence free") {
  Simulation sim;
  sim.grid = GridSpec(2, 16);
  sim.model.variant = ModelVariant::NavierStokes2D;
  sim.model.field = CoefficientField::layered(2, 2.0, 1.0);
  sim.model.eps = 1.0 / 2;
  sim.model.cubic = false;
  sim.noise = QWienerSpec(sim.grid, 8, 1.0, 2.0, 3);
  sim.stepper.dt = 1e-3;
  sim.stepper.horizon = 0.01;
  sim.members = 2;
  const auto run = run_ensemble(initial_ensemble(sim), sim);
  for (const auto& u : run.final.members) {
    CHECK(u.component_count() == 2);
    CHECK(max_abs(spectral_divergence(u)) <= 1e-10);
    CHECK(u.all_finite());
  }
}
