#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mvhom/archive.hpp"
#include "mvhom/cell.hpp"
#include "mvhom/commands.hpp"
#include "mvhom/config.hpp"
#include "mvhom/diagnostics.hpp"
#include "mvhom/ensemble.hpp"
#include "mvhom/errors.hpp"
#include "mvhom/integrator.hpp"

namespace py = pybind11;
using namespace mvhom;

namespace {

py::list matrix(const SymMatrix& m) {
  py::list rows;
  for (int i = 0; i < m.dim; ++i) {
    py::list row;
    for (int j = 0; j < m.dim; ++j) row.append(m(i, j));
    rows.append(row);
  }
  return rows;
}

py::dict estimate(const Estimate& e) {
  py::dict d;
  d["mean"] = e.mean;
  d["se"] = e.se;
  return d;
}

py::dict level(const LevelReport& l) {
  py::dict d;
  d["eps"] = l.eps;
  d["error"] = estimate(l.error);
  d["plain"] = estimate(l.plain);
  d["corrected"] = estimate(l.corrected);
  d["term"] = estimate(l.term);
  d["energy"] = estimate(l.energy);
  d["moment"] = estimate(l.moment);
  d["pairing"] = estimate(l.pairing);
  d["sup_mean_H2"] = l.sup_mean_H2;
  d["sup_mean_Hp"] = l.sup_mean_Hp;
  d["w2_final_norm"] = l.w2_final_norm;
  return d;
}

py::dict report(const ConvergenceReport& r) {
  py::dict d;
  d["eps"] = r.eps;
  d["replicas"] = r.replicas;
  d["members"] = r.members;
  d["steps"] = r.steps;
  d["dt"] = r.dt;
  d["moment_order"] = r.moment_order;
  d["tensor"] = matrix(r.tensor);
  py::list levels;
  for (const auto& l : r.levels) levels.append(level(l));
  d["levels"] = levels;
  d["homogenized"] = level(r.homogenized);
  d["coupling"] = r.coupling;
  return d;
}

IncrementFit simulate_increments(const RunConfig& cfg, double eps) {
  const Simulation sim = cfg.simulation(eps);
  Ensemble start = initial_ensemble(sim);
  IncrementAccumulator acc(cfg.lags, start.size());
  for (std::size_t m = 0; m < start.size(); ++m) acc.add(m, start.members[m]);
  run_ensemble(std::move(start), sim, [&](long, const Ensemble& e) {
    for (std::size_t m = 0; m < e.size(); ++m) acc.add(m, e.members[m]);
  });
  return fit_increments(acc.lags(), acc.mean_square(), sim.stepper.dt);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the mvhom core library.";
  m.attr("__version__") = MVHOM_VERSION;

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() { return py::object(py::exception<Error>(m, "MvhomError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = error_type.get_stored()(e.what());
      inst.attr("kind") = to_string(e.kind());
      if (auto* v = dynamic_cast<const ValidationError*>(&e)) inst.attr("key") = v->key;
      if (auto* i = dynamic_cast<const IntegrityError*>(&e)) inst.attr("file") = i->file;
      if (auto* q = dynamic_cast<const ParseError*>(&e)) inst.attr("line") = q->line;
      py::set_error(error_type.get_stored(), inst);
    }
  });

  py::class_<RunConfig>(m, "Config")
      .def_property_readonly("values", [](const RunConfig& c) { return c.values; })
      .def_property_readonly("eps", [](const RunConfig& c) { return c.eps; })
      .def_property_readonly("seed", [](const RunConfig& c) { return c.seed; })
      .def("canonical_text", &RunConfig::canonical_text)
      .def("digest", &RunConfig::digest)
      .def("with_override", [](const RunConfig& c, const std::string& key, const std::string& value) {
        return with_override(c, key, value);
      }, py::arg("key"), py::arg("value"));

  m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); }, py::arg("data"));

  m.def("cell_tensor", [](const RunConfig& c) {
    SymMatrix t;
    {
      py::gil_scoped_release release;
      t = solve_cell_problem(c.field(), c.cell, c.cell_tol, c.workers).tensor();
    }
    return matrix(t);
  }, py::arg("config"), "Homogenized tensor of the configured coefficient.");

  m.def("wasserstein2_1d", [](const std::vector<double>& a, const std::vector<double>& b) {
    return wasserstein2_1d(a, b);
  }, py::arg("a"), py::arg("b"));

  m.def("ladder", [](const RunConfig& c) {
    ConvergenceReport r;
    {
      py::gil_scoped_release release;
      r = ladder(c.ladder());
    }
    return report(r);
  }, py::arg("config"));

  m.def("increment_scaling", [](const RunConfig& c, double eps) {
    IncrementFit fit;
    {
      py::gil_scoped_release release;
      fit = simulate_increments(c, std::isnan(eps) ? c.eps.front() : eps);
    }
    py::dict d;
    d["lags"] = fit.lags;
    d["mean_square"] = fit.mean_square;
    d["degenerate"] = fit.degenerate;
    d["slope"] = fit.degenerate ? py::object(py::none()) : py::object(py::float_(fit.slope));
    d["intercept"] = fit.intercept;
    return d;
  }, py::arg("config"), py::arg("eps") = std::numeric_limits<double>::quiet_NaN());

  m.def("coefficient_csv", &coefficient_csv, py::arg("config"), py::arg("eps"), py::arg("t") = 0.0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"mvhom"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command line; returns (exit code, stdout, stderr).");
}
