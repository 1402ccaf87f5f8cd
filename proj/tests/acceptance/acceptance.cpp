// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mvhom/archive.hpp"
#include "mvhom/cell.hpp"
#include "mvhom/commands.hpp"
#include "mvhom/config.hpp"
#include "mvhom/diagnostics.hpp"
#include "mvhom/ensemble.hpp"
#include "mvhom/errors.hpp"
#include "mvhom/integrator.hpp"
#include "mvhom/models.hpp"
#include "mvhom/noise.hpp"

#ifndef MVHOM_CONFIG_DIR
#define MVHOM_CONFIG_DIR "configs"
#endif

using namespace mvhom;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_seconds, const std::function<Verdict()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0 && secs > budget_seconds) {
    v.pass = false;
    v.detail += "; runtime " + fmt("%.1f", secs) + " s over budget " + fmt("%.0f", budget_seconds) + " s";
  }
  if (!v.pass) ++failures;
  std::printf("criterion %2d %s  %-28s %7.2f s  %s\n", id, v.pass ? "PASS" : "FAIL", name, secs, v.detail.c_str());
  std::fflush(stdout);
}

RunConfig load(const char* name) { return load_config(std::string(MVHOM_CONFIG_DIR) + "/" + name); }

ScalarField random_field(const GridSpec& g, std::uint64_t seed, std::size_t modes = 16) {
  NoiseStream s(StreamKey{seed, 99, 1, 5});
  return random_smooth_field(g, s, modes, 1.0);
}

double max_abs_tensor_error(const SymMatrix& t, double c) {
  double e = 0;
  for (int i = 0; i < t.dim; ++i)
    for (int j = 0; j < t.dim; ++j) e = std::max(e, std::abs(t(i, j) - (i == j ? c : 0.0)));
  return e;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double c = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return c / std::sqrt(va * vb);
}

// ---- 1-3: cell problem ---------------------------------------------------------

Verdict cell_exactness() {
  Verdict v;
  for (int dim : {1, 2}) {
    const double c = 2.5;
    const auto sol = solve_cell_problem(CoefficientField::constant(dim, c), {dim, dim == 1 ? 256 : 64, 1});
    double eta = 0;
    for (int k = 0; k < dim; ++k)
      for (double x : sol.corrector(0, k)) eta = std::max(eta, std::abs(x));
    const double err = max_abs_tensor_error(sol.tensor(), c);
    v.require(err <= 1e-10 && eta <= 1e-10,
              std::to_string(dim) + "D |a-cI| " + fmt("%.1e", err) + " max|eta| " + fmt("%.1e", eta));
  }
  return v;
}

Verdict harmonic_oracle() {
  Verdict v;
  const double s3 = std::sqrt(3.0);
  const auto lay = solve_cell_problem(CoefficientField::layered(1, 2.0, 1.0), {1, 256, 1});
  const double e1 = std::abs(lay.tensor()(0, 0) - s3) / s3;
  v.require(e1 <= 5e-4, "layered rel err " + fmt("%.2e", e1) + " <= 5e-4");
  const auto sep = solve_cell_problem(CoefficientField::separable_trig(1, 2.0, 1.0, 2.0, 1.0), {1, 256, 16});
  const double e2 = std::abs(sep.tensor()(0, 0) - 2 * s3) / (2 * s3);
  v.require(e2 <= 1e-3, "separable rel err " + fmt("%.2e", e2) + " <= 1e-3");
  return v;
}

Verdict laminate() {
  Verdict v;
  const auto sol = solve_cell_problem(CoefficientField::layered(2, 2.0, 1.0), {2, 128, 1});
  const auto& t = sol.tensor();
  const double e11 = std::abs(t(0, 0) - std::sqrt(3.0)), e12 = std::abs(t(0, 1)), e22 = std::abs(t(1, 1) - 2.0);
  v.require(e11 <= 1e-3, "|a11-sqrt3| " + fmt("%.2e", e11));
  v.require(e12 <= 1e-6, "|a12| " + fmt("%.1e", e12));
  v.require(e22 <= 1e-3, "|a22-2| " + fmt("%.2e", e22));
  return v;
}

// ---- 4: operator contracts ------------------------------------------------------

Verdict contracts() {
  Verdict v;
  const double eps = 1.0 / 8, t = 0.3;
  double sym = 0, coercive_ratio = std::numeric_limits<double>::infinity(), face_kappa = 1e300;
  double declared = 0;
  for (int dim : {1, 2}) {
    const GridSpec g(dim, dim == 1 ? 256 : 128);
    const auto field = CoefficientField::layered(dim, 2.0, 1.0);
    declared = field.kappa();
    const auto op = DiffusionOperator::oscillating(g, field, eps, t);
    for (int a = 0; a < dim; ++a)
      for (double f : op.faces(a)) face_kappa = std::min(face_kappa, f);
    for (std::uint64_t s = 0; s < 50; ++s) {
      const auto u = random_field(g, 2 * s), w = random_field(g, 2 * s + 1);
      const auto au = op.apply(u), aw = op.apply(w);
      const double scale = norm_H(au) * norm_H(w) + norm_H(u) * norm_H(aw);
      sym = std::max(sym, std::abs(inner_H(au, w) - inner_H(u, aw)) / scale);
      coercive_ratio = std::min(coercive_ratio, inner_H(au, u) / (declared * gradient_energy(u)));
    }
  }
  v.require(sym <= 1e-12, "A symmetry " + fmt("%.1e", sym) + " <= 1e-12");
  v.require(coercive_ratio >= 1.0 - 1e-12, "min (Au,u)/(kappa|grad u|^2) " + fmt("%.3f", coercive_ratio));
  const double kappa_hat = verify_ellipticity(CoefficientField::layered(2, 2.0, 1.0), 100000).kappa_hat;
  v.require(std::abs(kappa_hat / declared - 1) <= 0.05 && std::abs(face_kappa / declared - 1) <= 0.05,
            "measured kappa " + fmt("%.4f", kappa_hat) + " (coefficient), " + fmt("%.4f", face_kappa) +
                " (operator) vs " + fmt("%.2f", declared));

  const GridSpec g2(2, 32);
  double skew = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto u = leray_project(VectorField({random_field(g2, 1000 + 4 * s, 10), random_field(g2, 1001 + 4 * s, 10)}));
    const auto w = leray_project(VectorField({random_field(g2, 1002 + 4 * s, 10), random_field(g2, 1003 + 4 * s, 10)}));
    const double wv = norm_V(w);
    skew = std::max(skew, std::abs(inner_H(apply_B(u, w), w)) / (norm_H(u) * wv * wv));
  }
  v.require(skew <= 1e-12, "B skew " + fmt("%.1e", skew) + " <= 1e-12");

  int violations = 0;
  ModelSpec m;
  m.drag = false;
  for (int dim : {1, 2}) {
    const GridSpec g(dim, 64);
    for (std::uint64_t s = 0; s < 50; ++s) {
      NoiseStream amp(StreamKey{s, 7, 7, 7});
      const double a1 = 0.1 + 3 * amp.uniform_at(0), a2 = 0.1 + 3 * amp.uniform_at(1);
      const VectorField u1({a1 * random_field(g, 5000 + 2 * s)}), u2({a2 * random_field(g, 5001 + 2 * s)});
      const auto d = u1 - u2;
      const auto f = apply_F(u1, EmpiricalMeasure::dirac(u1), m, 0) - apply_F(u2, EmpiricalMeasure::dirac(u2), m, 0);
      const double dd = inner_H(d, d);
      if (inner_H(f, d) > dd * (1 + 1e-14)) ++violations;
    }
  }
  v.require(violations == 0, "cubic monotonicity violations " + std::to_string(violations) + "/100");
  const auto rep = check_F_contracts(GridSpec(1, 64), ModelSpec{}, 100, 3);
  v.require(rep.growth_max_violation <= 0, "growth with C = " + fmt("%.1f", rep.growth_constant) +
                                               " (fitted " + fmt("%.3f", rep.growth_fitted) + ")");
  return v;
}

// ---- 5: noise calibration -------------------------------------------------------

Verdict noise_calibration() {
  Verdict v;
  const auto cfg = load("reference_ladder.ini");
  const auto spec = cfg.simulation(cfg.eps.front()).noise;
  const double dt = cfg.stepper.dt;
  NoiseStream s(StreamKey{cfg.seed, 0, 0, 0});
  const int draws = 10000;
  double sq = 0;
  std::vector<double> c1, c1_next, c2, c2_next;
  for (int i = 0; i < draws; ++i) {
    const auto xi = draw_step_normals(s, spec);
    const auto inc = increment_from_normals(spec, xi, dt);
    const double h = norm_H(inc);
    sq += h * h;
    const double a = xi[0] * std::sqrt(spec.eigenvalues()[0] * dt), b = xi[1] * std::sqrt(spec.eigenvalues()[1] * dt);
    if (i % 2 == 0) {
      c1.push_back(a);
      c2.push_back(b);
    } else {
      c1_next.push_back(a);
      c2_next.push_back(b);
    }
  }
  const double ratio = sq / draws / (partial_trace(spec) * dt);
  v.require(std::abs(ratio - 1) <= 0.05, "E|dW|^2 / (trace dt) " + fmt("%.4f", ratio));
  const double corr = std::max(std::abs(correlation(c1, c1_next)), std::abs(correlation(c2, c2_next)));
  v.require(corr <= 0.05, "inter-step correlation " + fmt("%.4f", corr) + " <= 0.05");
  return v;
}

// ---- 6-8: reference ladder ------------------------------------------------------

std::optional<ConvergenceReport> reference;

Verdict ladder_convergence() {
  Verdict v;
  const auto cfg = load("reference_ladder.ini");
  reference = ladder(cfg.ladder());
  const auto& L = reference->levels;
  bool decreasing = true;
  std::string errs;
  for (std::size_t l = 0; l < L.size(); ++l) {
    if (l > 0 && !(L[l].error.mean < L[l - 1].error.mean)) decreasing = false;
    errs += (l ? ", " : "") + fmt("%.3e", L[l].error.mean);
  }
  v.require(decreasing, "errors " + errs + " strictly decreasing");
  const double r = L.back().error.mean / L.front().error.mean;
  v.require(r <= 0.5, "error(1/32)/error(1/8) " + fmt("%.3f", r) + " <= 0.5");
  return v;
}

Verdict corrector_gain() {
  Verdict v;
  if (!reference) throw Error(ErrorKind::Domain, "reference ladder did not run");
  const auto& L = reference->levels;
  const double gc = L.front().corrected.mean / L.back().corrected.mean;
  const double gp = L.front().plain.mean / L.back().plain.mean;
  v.require(gc >= 2.0, "corrected falls " + fmt("%.2f", gc) + "x >= 2");
  v.require(gp < 1.5, "plain falls " + fmt("%.2f", gp) + "x < 1.5");
  return v;
}

Verdict energy_uniformity() {
  Verdict v;
  if (!reference) throw Error(ErrorKind::Domain, "reference ladder did not run");
  double lo = 1e300, hi = 0;
  bool finite = true, se_ok = true;
  for (const auto& l : reference->levels) {
    lo = std::min(lo, l.energy.mean);
    hi = std::max(hi, l.energy.mean);
    finite = finite && std::isfinite(l.sup_mean_H2) && std::isfinite(l.sup_mean_Hp);
    se_ok = se_ok && std::isfinite(l.energy.se) && l.energy.se >= 0 && std::isfinite(l.moment.se);
  }
  v.require(hi / lo <= 1.5, "energy max/min " + fmt("%.4f", hi / lo) + " <= 1.5");
  v.require(finite, "sup mean |u|^2 = " + fmt("%.4f", reference->levels.back().sup_mean_H2) + ", sup mean |u|^4 = " +
                        fmt("%.4f", reference->levels.back().sup_mean_Hp) + " finite");
  v.require(se_ok, "standard errors reported, energy se " + fmt("%.1e", reference->levels.back().energy.se));
  return v;
}

// ---- 9: increments --------------------------------------------------------------

Verdict increment_slope() {
  Verdict v;
  const auto cfg = load("noise_increments.ini");
  const Simulation sim = cfg.simulation(cfg.eps.front());
  Ensemble start = initial_ensemble(sim);
  IncrementAccumulator acc(cfg.lags, start.size());
  for (std::size_t m = 0; m < start.size(); ++m) acc.add(m, start.members[m]);
  run_ensemble(std::move(start), sim, [&](long, const Ensemble& e) {
    for (std::size_t m = 0; m < e.size(); ++m) acc.add(m, e.members[m]);
  });
  const auto fit = fit_increments(acc.lags(), acc.mean_square(), sim.stepper.dt);
  v.require(sim.members == 32, std::to_string(sim.members) + " paths");
  v.require(!fit.degenerate && fit.slope >= 0.7 && fit.slope <= 1.3, "slope " + fmt("%.4f", fit.slope) + " in [0.7, 1.3]");
  return v;
}

// ---- 10: mean field -------------------------------------------------------------

Verdict mean_field() {
  Verdict v;
  const auto cfg = load("reference_ladder.ini");
  Simulation one = cfg.simulation(cfg.eps.front());
  one.members = 1;
  Simulation off = one;
  off.model.drag = false;
  const auto a = run_ensemble(initial_ensemble(one), one);
  const auto b = run_ensemble(initial_ensemble(off), off);
  v.require(a.final.members[0] == b.final.members[0], "M=1 drag on/off bitwise equal");

  const Simulation sim = cfg.simulation(cfg.eps.front());
  const auto g16 = chaos_gap(sim, 16, 256), g64 = chaos_gap(sim, 64, 256);
  v.require(g16.distance >= g64.distance,
            "chaos gap(16,256) " + fmt("%.3e", g16.distance) + " >= gap(64,256) " + fmt("%.3e", g64.distance));

  int bad = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    NoiseStream st(StreamKey{s, 3, 3, 3});
    std::vector<double> x(32), y(32), z(32);
    for (std::size_t i = 0; i < 32; ++i) {
      x[i] = st.normal_at(i);
      y[i] = 1.5 * st.normal_at(100 + i) + 0.3;
      z[i] = st.uniform_at(i) * 4 - 2;
    }
    auto xp = x;
    std::reverse(xp.begin(), xp.end());
    const double xy = wasserstein2_1d(x, y), yx = wasserstein2_1d(y, x);
    if (wasserstein2_1d(x, xp) != 0.0 || xy != yx || !(xy > 0) ||
        wasserstein2_1d(x, z) > xy + wasserstein2_1d(y, z) + 1e-12)
      ++bad;
  }
  v.require(bad == 0, "W2 axioms on 100 triples, failures " + std::to_string(bad));
  return v;
}

// ---- 11: reproducibility ----------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "run_info.json")
      files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

Verdict reproducibility() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / ("mvhom_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  struct Run {
    const char* command;
    const char* config;
  };
  const Run runs[] = {{"cell", "reference_ladder.ini"},
                      {"simulate", "noise_increments.ini"},
                      {"ladder", "smoke_ladder.ini"},
                      {"corrector", "smoke_ladder.ini"}};
  for (const auto& r : runs) {
    const auto cfg = load(r.config);
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (std::string(r.command) + std::to_string(rep));
      write_run(dir, r.command, cfg, compute_raw(r.command, cfg, std::numeric_limits<double>::quiet_NaN()), true, 0.0);
      if (rep == 0) {
        first = tree(dir);
      } else {
        const auto second = tree(dir);
        bool same = first == second;
        regenerate_report(dir);
        same = same && tree(dir) == second;
        v.require(same, std::string(r.command) + " " + std::to_string(second.size()) + " files identical");
      }
    }
  }
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  criterion(1, "cell exactness", 1, cell_exactness);
  criterion(2, "1D harmonic-mean oracle", 5, harmonic_oracle);
  criterion(3, "2D laminate", 60, laminate);
  criterion(4, "operator contracts", 30, contracts);
  criterion(5, "noise calibration", 10, noise_calibration);
  criterion(6, "homogenization ladder", 600, ladder_convergence);
  criterion(7, "corrector residual", 0, corrector_gain);
  criterion(8, "energy uniformity", 0, energy_uniformity);
  criterion(9, "increment scaling", 120, increment_slope);
  criterion(10, "mean-field sanity", 0, mean_field);
  criterion(11, "reproducibility", 0, reproducibility);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
