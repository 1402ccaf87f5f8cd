#include <string>

#include "doctest.h"
#include "mvhom/config.hpp"
#include "mvhom/errors.hpp"

using namespace mvhom;

namespace {

const char* kBase = R"(# small Allen-Cahn run
[grid]
dim = 1
n = 128

[coefficient]
family = layered
alpha = 2
beta = 1

[model]
variant = allen_cahn
sigma0 = 0.2

[run]
epsilon = 1/4, 1/8
seed = 5
)";

}  // namespace

TEST_CASE("empty config takes the defaults") {
  const auto c = parse_config("");
  CHECK(c.grid.cells() == 1024);
  CHECK(c.members == 8);
  CHECK(c.replicas == 32);
  REQUIRE(c.eps.size() == 3);
  CHECK(c.eps[2] == 1.0 / 32);
  CHECK(c.stepper.dt == 1e-4);
  CHECK(c.stepper.horizon == 0.25);
  CHECK(c.seed == 20260101);
  CHECK(c.lags == std::vector<long>{1, 2, 4, 8, 16});
  CHECK(c.kappa == doctest::Approx(1.0));
  CHECK(c.digest().size() == 64);
  CHECK(parse_config(c.canonical_text()).digest() == c.digest());
}

TEST_CASE("digest ignores order, comments and execution knobs") {
  const auto a = parse_config(kBase);
  const auto b = parse_config(R"(
[run]
seed = 5   # same seed
epsilon = 0.25, 0.125
; reordered sections
[model]
sigma0 = 0.2
variant = allen_cahn
[coefficient]
beta = 1
alpha = 2.0
family = layered
[grid]
n = 128
dim = 1
[run]
workers = 4
output = elsewhere
)");
  CHECK(a.digest() == b.digest());
  CHECK(b.workers == 4);
  CHECK(with_override(a, "run.seed", "6").digest() != a.digest());
  CHECK(with_override(a, "run.seed", "6").seed == 6);
}

TEST_CASE("parse errors carry the line") {
  try {
    parse_config("[grid]\nn = 64\nbogus = 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(parse_config("[nowhere]\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[grid]\nn = 64\nn = 128\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[grid\n"), ParseError);
  CHECK_THROWS_AS(parse_config("[grid]\njust text\n"), ParseError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), IoError);
}

TEST_CASE("validation errors name the key") {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ValidationError& e) {
      return e.key;
    }
    return std::string("(none)");
  };
  CHECK(key_of("[run]\nepsilon = 1/8, 1/4\n") == "run.epsilon");
  CHECK(key_of("[grid]\nn = 100\n") == "grid.n");
  CHECK(key_of("[grid]\nn = 64\n[run]\nepsilon = 1/8\n[noise]\nmodes = 8\n") == "grid.n");
  CHECK(key_of("[stepper]\ndt = 0.01\nT = 0.02\n") == "stepper.dt");
  CHECK(key_of("[stepper]\nT = 0.00015\n") == "stepper.T");
  CHECK(key_of("[model]\nvariant = burgers\n") == "model.variant");
  CHECK(key_of("[diagnostics]\nlags = 1, 2, 4\n") == "diagnostics.lags");
  CHECK(key_of("[coefficient]\nalpha = 1\nbeta = 2\n") == "coefficient.beta");
  CHECK(key_of("[coefficient]\nkappa = 1.5\n") == "coefficient.kappa");

  try {
    parse_config("[model]\nell = 0.5\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.key == "model.ell");
    CHECK(std::string(e.what()).find("(kappa - 2 eta)/2") != std::string::npos);
  }
}

TEST_CASE("typed views follow the values") {
  const auto c = parse_config(kBase);
  CHECK(c.grid.cells() == 128);
  CHECK(c.sigma0 == 0.2);
  CHECK(c.eps == std::vector<double>{0.25, 0.125});
  const auto sim = c.simulation(0.125, 3);
  CHECK(sim.model.eps == 0.125);
  CHECK(sim.replica == 3);
  CHECK(sim.seed == 5);
  CHECK(sim.model.drift.kappa == doctest::Approx(1.0));
  const auto lad = c.ladder();
  CHECK(lad.eps == c.eps);
  CHECK(lad.replicas == 32);
  CHECK_NOTHROW(lad.validate());
}
