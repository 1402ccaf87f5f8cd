#include "mvhom/commands.hpp"

#include <fftw3.h>
#include <openssl/crypto.h>
#include <sys/utsname.h>

#include <chrono>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvhom/cell.hpp"
#include "mvhom/diagnostics.hpp"
#include "mvhom/integrator.hpp"

#ifndef MVHOM_VERSION
#define MVHOM_VERSION "0.0.0"
#endif

namespace mvhom {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Validation:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Integrity:
      return 4;
    default:
      return 3;
  }
}

std::string error_json(const std::exception& e) {
  json j;
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["error"] = to_string(err->kind());
    j["exit_code"] = exit_code(err->kind());
    if (const auto* p = dynamic_cast<const ParseError*>(err)) j["line"] = p->line;
    if (const auto* v = dynamic_cast<const ValidationError*>(err)) j["key"] = v->key;
    if (const auto* i = dynamic_cast<const IntegrityError*>(err)) j["file"] = i->file;
    if (const auto* s = dynamic_cast<const SolverDiverged*>(err)) {
      j["iterations"] = s->iterations;
      j["residual"] = s->residual;
    }
  } else {
    j["error"] = "InternalError";
    j["exit_code"] = 3;
  }
  j["message"] = e.what();
  return j.dump();
}

namespace {

Blob blob(std::vector<std::uint64_t> shape, std::vector<double> data) {
  return Blob{std::move(shape), std::move(data)};
}

const Blob& need(const RawSet& raw, const std::string& name) {
  auto it = raw.find(name);
  if (it == raw.end()) throw IntegrityError(name, "raw array missing");
  return it->second;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json tensor_json(const SymMatrix& t) {
  json rows = json::array();
  for (int i = 0; i < t.dim; ++i) {
    json row = json::array();
    for (int j = 0; j < t.dim; ++j) row.push_back(t(i, j));
    rows.push_back(row);
  }
  return rows;
}

json estimate_json(const Estimate& e) { return json{{"mean", e.mean}, {"se", e.se}}; }

// ---- cell -------------------------------------------------------------------------

RawSet cell_raw(const RunConfig& config) {
  const CellSolution sol = solve_cell_problem(config.field(), config.cell, config.cell_tol, config.workers);
  const auto& g = sol.grid();
  const int N = g.dim;
  const std::uint64_t S = g.slices, cells = g.size();
  RawSet raw;
  std::vector<double> t;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) t.push_back(sol.tensor()(i, j));
  raw["raw/tensor.bin"] = blob({static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(N)}, t);
  std::vector<double> eta, stats;
  for (int s = 0; s < g.slices; ++s)
    for (int k = 0; k < N; ++k) {
      const auto& e = sol.corrector(s, k);
      eta.insert(eta.end(), e.begin(), e.end());
      stats.push_back(sol.stats(s, k).iterations);
      stats.push_back(sol.stats(s, k).relative_residual);
    }
  raw["raw/correctors.bin"] = blob({S, static_cast<std::uint64_t>(N), cells}, eta);
  raw["raw/stats.bin"] = blob({S, static_cast<std::uint64_t>(N), 2}, stats);
  return raw;
}

std::map<std::string, std::string> cell_outputs(const RunConfig& config, const RawSet& raw) {
  const Blob& t = need(raw, "raw/tensor.bin");
  const Blob& eta = need(raw, "raw/correctors.bin");
  const Blob& stats = need(raw, "raw/stats.bin");
  const int N = static_cast<int>(t.shape.at(0));
  SymMatrix tensor;
  tensor.dim = N;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) tensor(i, j) = t.data[i * N + j];
  double max_eta = 0.0;
  for (double v : eta.data) max_eta = std::max(max_eta, std::abs(v));
  json st = json::array();
  for (std::size_t s = 0; s < stats.shape.at(0); ++s)
    for (int k = 0; k < N; ++k) {
      const std::size_t base = (s * N + k) * 2;
      st.push_back({{"slice", s}, {"direction", k}, {"iterations", stats.data[base]},
                    {"relative_residual", stats.data[base + 1]}});
    }
  json j = {{"family", to_string(config.family)},
            {"dim", N},
            {"m", config.cell.m},
            {"slices", config.cell.slices},
            {"kappa", config.kappa},
            {"tensor", tensor_json(tensor)},
            {"max_abs_corrector", max_eta},
            {"solves", st}};
  std::string csv = "i,j,value\n";
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) csv += std::to_string(i) + "," + std::to_string(k) + "," + number(tensor(i, k)) + "\n";
  std::map<std::string, std::string> out{{"cell.json", j.dump(2) + "\n"}, {"tensor.csv", csv}};

  // One CSV per (slice, direction): node coordinates on the cell grid and eta.
  const std::size_t cells = eta.shape.at(2);
  const int m = config.cell.m;
  for (std::size_t s = 0; s < eta.shape.at(0); ++s)
    for (int k = 0; k < N; ++k) {
      std::string c = N == 1 ? "y1,eta\n" : "y1,y2,eta\n";
      const double* e = eta.data.data() + (s * N + k) * cells;
      for (std::size_t idx = 0; idx < cells; ++idx) {
        if (N == 1) {
          c += number(static_cast<double>(idx) / m);
        } else {
          c += number(static_cast<double>(idx / m) / m) + "," + number(static_cast<double>(idx % m) / m);
        }
        c += "," + number(e[idx]) + "\n";
      }
      char name[64];
      std::snprintf(name, sizeof name, "correctors/slice%03zu_k%d.csv", s, k);
      out[name] = std::move(c);
    }
  return out;
}

// ---- simulate ---------------------------------------------------------------------

constexpr std::size_t kLedgerColumns = 10;

RawSet simulate_raw(const RunConfig& config, double eps) {
  const Simulation sim = config.simulation(eps);
  Ensemble start = initial_ensemble(sim);
  IncrementAccumulator inc(config.lags, start.size());
  for (std::size_t m = 0; m < start.size(); ++m) inc.add(m, start.members[m]);
  const EnsembleRun run = run_ensemble(std::move(start), sim, [&](long, const Ensemble& e) {
    for (std::size_t m = 0; m < e.size(); ++m) inc.add(m, e.members[m]);
  });
  const std::size_t M = run.final.size();
  const int C = sim.model.components();
  const std::size_t size = sim.grid.size();
  std::vector<double> final;
  final.reserve(M * C * size);
  for (const auto& u : run.final.members)
    for (int c = 0; c < C; ++c) final.insert(final.end(), u[c].values().begin(), u[c].values().end());
  const std::size_t R = run.ledgers.front().records().size();
  std::vector<double> led;
  led.reserve(M * R * kLedgerColumns);
  for (const auto& l : run.ledgers)
    for (const auto& r : l.records())
      for (double v : {static_cast<double>(r.step), r.t, r.H2, r.Hp, r.V2, r.L4, r.dissipation, r.quartic,
                       r.drift_work, r.noise_work})
        led.push_back(v);
  RawSet raw;
  raw["raw/final.bin"] = blob({M, static_cast<std::uint64_t>(C), size}, final);
  raw["raw/ledgers.bin"] = blob({M, R, kLedgerColumns}, led);
  raw["raw/meta.bin"] = blob({3}, {eps, sim.stepper.dt, static_cast<double>(sim.stepper.moment_order)});
  std::vector<double> incs;
  const auto ms = inc.mean_square();
  for (std::size_t l = 0; l < ms.size(); ++l) {
    incs.push_back(static_cast<double>(inc.lags()[l]));
    incs.push_back(ms[l]);
  }
  raw["raw/increments.bin"] = blob({ms.size(), 2}, incs);
  return raw;
}

std::map<std::string, std::string> simulate_outputs(const RunConfig& config, const RawSet& raw) {
  const Blob& led = need(raw, "raw/ledgers.bin");
  const Blob& fin = need(raw, "raw/final.bin");
  const Blob& meta = need(raw, "raw/meta.bin");
  const std::size_t M = led.shape.at(0), R = led.shape.at(1);
  std::map<std::string, std::string> out;
  json members = json::array();
  double energy_mean = 0.0, final_mean = 0.0;
  std::vector<double> mean_H2(R, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<LedgerRecord> recs(R);
    double sup = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const double* v = &led.data[(m * R + r) * kLedgerColumns];
      recs[r] = LedgerRecord{static_cast<long>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
      sup = std::max(sup, v[2]);
      mean_H2[r] += v[2] / static_cast<double>(M);
    }
    std::ostringstream csv;
    write_ledger_csv(csv, recs);
    char name[64];
    std::snprintf(name, sizeof name, "ledgers/member_%03zu.csv", m);
    out[name] = csv.str();
    const double energy = sup + recs.back().dissipation + recs.back().quartic;
    const std::size_t per = fin.shape.at(1) * fin.shape.at(2);
    double h2 = 0.0;
    for (std::size_t i = 0; i < per; ++i) h2 += fin.data[m * per + i] * fin.data[m * per + i];
    const double hnorm = std::sqrt(h2 * config.grid.cell_volume());
    energy_mean += energy / static_cast<double>(M);
    final_mean += hnorm / static_cast<double>(M);
    members.push_back({{"member", m}, {"energy_functional", energy}, {"final_H_norm", hnorm},
                       {"drift_work", recs.back().drift_work}, {"noise_work", recs.back().noise_work}});
  }
  double sup_mean = 0.0;
  for (double v : mean_H2) sup_mean = std::max(sup_mean, v);
  const Blob& incs = need(raw, "raw/increments.bin");
  std::vector<long> lags;
  std::vector<double> ms;
  for (std::size_t l = 0; l < incs.shape.at(0); ++l) {
    lags.push_back(static_cast<long>(incs.data[2 * l]));
    ms.push_back(incs.data[2 * l + 1]);
  }
  const IncrementFit fit = fit_increments(lags, ms, meta.data[1]);
  json increments = {{"lags", lags}, {"mean_square", ms}, {"degenerate", fit.degenerate}};
  increments["slope"] = fit.degenerate ? json(nullptr) : json(fit.slope);
  json j = {{"eps", meta.data[0]},
            {"dt", meta.data[1]},
            {"steps", R - 1},
            {"members", M},
            {"mean_energy_functional", energy_mean},
            {"mean_final_H_norm", final_mean},
            {"sup_mean_H2", sup_mean},
            {"increments", increments},
            {"per_member", members}};
  out["summary.json"] = j.dump(2) + "\n";
  return out;
}

// ---- ladder / corrector -----------------------------------------------------------

constexpr std::size_t kReplicaRows = 7;

RawSet ladder_raw(const RunConfig& config) {
  const LadderRaw lr = run_ladder(config.ladder());
  RawSet raw;
  raw["raw/eps.bin"] = blob({lr.eps.size()}, lr.eps);
  const int N = lr.tensor.dim;
  std::vector<double> t;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) t.push_back(lr.tensor(i, j));
  raw["raw/tensor.bin"] = blob({static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(N)}, t);
  raw["raw/meta.bin"] = blob({5}, {static_cast<double>(lr.replicas), static_cast<double>(lr.members),
                                   static_cast<double>(lr.steps), lr.dt, static_cast<double>(lr.moment_order)});
  for (std::size_t l = 0; l < lr.levels.size(); ++l) {
    const auto& lv = lr.levels[l];
    std::vector<double> rows;
    for (const auto* v : {&lv.error_sq, &lv.plain_sq, &lv.corrected_sq, &lv.term_sq, &lv.energy, &lv.moment,
                          &lv.pairing})
      rows.insert(rows.end(), v->begin(), v->end());
    const std::string p = "raw/level" + std::to_string(l);
    raw[p + "_replica.bin"] = blob({kReplicaRows, lr.replicas}, rows);
    raw[p + "_final_norm.bin"] = blob({lr.replicas, lr.members}, lv.final_norm);
    std::vector<double> mom = lv.mean_H2;
    mom.insert(mom.end(), lv.mean_Hp.begin(), lv.mean_Hp.end());
    raw[p + "_moments.bin"] = blob({2, static_cast<std::uint64_t>(lr.steps + 1)}, mom);
  }
  return raw;
}

LadderRaw ladder_from_raw(const RawSet& raw) {
  LadderRaw lr;
  lr.eps = need(raw, "raw/eps.bin").data;
  const Blob& t = need(raw, "raw/tensor.bin");
  const int N = static_cast<int>(t.shape.at(0));
  lr.tensor.dim = N;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) lr.tensor(i, j) = t.data[i * N + j];
  const auto& meta = need(raw, "raw/meta.bin").data;
  lr.replicas = static_cast<std::size_t>(meta.at(0));
  lr.members = static_cast<std::size_t>(meta.at(1));
  lr.steps = static_cast<long>(meta.at(2));
  lr.dt = meta.at(3);
  lr.moment_order = static_cast<int>(meta.at(4));
  const std::size_t R = lr.replicas;
  for (std::size_t l = 0; l <= lr.eps.size(); ++l) {
    const std::string p = "raw/level" + std::to_string(l);
    const Blob& rep = need(raw, p + "_replica.bin");
    const Blob& mom = need(raw, p + "_moments.bin");
    if (rep.data.size() != kReplicaRows * R) throw IntegrityError(p + "_replica.bin", "unexpected shape");
    LadderRaw::Level lv;
    auto row = [&](std::size_t r) { return std::vector<double>(rep.data.begin() + r * R, rep.data.begin() + (r + 1) * R); };
    lv.error_sq = row(0);
    lv.plain_sq = row(1);
    lv.corrected_sq = row(2);
    lv.term_sq = row(3);
    lv.energy = row(4);
    lv.moment = row(5);
    lv.pairing = row(6);
    lv.final_norm = need(raw, p + "_final_norm.bin").data;
    const std::size_t n = mom.shape.at(1);
    lv.mean_H2.assign(mom.data.begin(), mom.data.begin() + n);
    lv.mean_Hp.assign(mom.data.begin() + n, mom.data.end());
    lr.levels.push_back(std::move(lv));
  }
  return lr;
}

json level_json(const LevelReport& r) {
  return {{"eps", r.eps},
          {"error", estimate_json(r.error)},
          {"plain_gradient", estimate_json(r.plain)},
          {"corrected_gradient", estimate_json(r.corrected)},
          {"corrector_term", estimate_json(r.term)},
          {"energy_functional", estimate_json(r.energy)},
          {"moment_functional", estimate_json(r.moment)},
          {"pairing_sin2piy", estimate_json(r.pairing)},
          {"sup_mean_H2", r.sup_mean_H2},
          {"sup_mean_Hp", r.sup_mean_Hp},
          {"w2_final_H_norm", r.w2_final_norm}};
}

double ratio(double a, double b) { return b != 0.0 ? a / b : std::numeric_limits<double>::infinity(); }

std::map<std::string, std::string> ladder_outputs(const RawSet& raw, bool plot_data) {
  const ConvergenceReport rep = assemble_report(ladder_from_raw(raw));
  json levels = json::array();
  for (const auto& l : rep.levels) levels.push_back(level_json(l));
  double emax = 0.0, emin = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    emax = std::max(emax, rep.levels[i].energy.mean);
    emin = std::min(emin, rep.levels[i].energy.mean);
    if (i > 0 && !(rep.levels[i].error.mean < rep.levels[i - 1].error.mean)) decreasing = false;
  }
  const auto& first = rep.levels.front();
  const auto& last = rep.levels.back();
  json j = {{"eps", rep.eps},
            {"replicas", rep.replicas},
            {"members", rep.members},
            {"steps", rep.steps},
            {"dt", rep.dt},
            {"moment_order", rep.moment_order},
            {"tensor", tensor_json(rep.tensor)},
            {"coupling", rep.coupling},
            {"levels", levels},
            {"homogenized", level_json(rep.homogenized)},
            {"summary",
             {{"errors_strictly_decreasing", decreasing},
              {"error_ratio_last_first", ratio(last.error.mean, first.error.mean)},
              {"corrected_ratio_first_last", ratio(first.corrected.mean, last.corrected.mean)},
              {"plain_ratio_first_last", ratio(first.plain.mean, last.plain.mean)},
              {"energy_max_over_min", ratio(emax, emin)},
              {"pairing_ratio_last_first", ratio(std::abs(last.pairing.mean), std::abs(first.pairing.mean))}}}};
  std::string csv =
      "eps,error,error_se,plain,plain_se,corrected,corrected_se,term,energy,energy_se,moment,moment_se,"
      "pairing,pairing_se,sup_mean_H2,sup_mean_Hp,w2_final_H_norm\n";
  for (const auto& l : rep.levels) {
    for (double v : {l.eps, l.error.mean, l.error.se, l.plain.mean, l.plain.se, l.corrected.mean, l.corrected.se,
                     l.term.mean, l.energy.mean, l.energy.se, l.moment.mean, l.moment.se, l.pairing.mean,
                     l.pairing.se, l.sup_mean_H2, l.sup_mean_Hp})
      csv += number(v) + ",";
    csv += number(l.w2_final_norm) + "\n";
  }
  std::map<std::string, std::string> out{{"report.json", j.dump(2) + "\n"}, {"report.csv", csv}};
  if (plot_data) {
    std::string plot = "eps,error,error_se\n";
    for (const auto& l : rep.levels) plot += number(l.eps) + "," + number(l.error.mean) + "," + number(l.error.se) + "\n";
    out["plot/error.csv"] = plot;
  }
  return out;
}

std::map<std::string, std::string> corrector_outputs(const RawSet& raw, bool plot_data) {
  const ConvergenceReport rep = assemble_report(ladder_from_raw(raw));
  json rows = json::array();
  std::string csv = "eps,plain,plain_se,corrected,corrected_se,term,term_se\n";
  for (const auto& l : rep.levels) {
    rows.push_back({{"eps", l.eps},
                    {"plain", estimate_json(l.plain)},
                    {"corrected", estimate_json(l.corrected)},
                    {"corrector_term", estimate_json(l.term)}});
    for (double v : {l.eps, l.plain.mean, l.plain.se, l.corrected.mean, l.corrected.se, l.term.mean})
      csv += number(v) + ",";
    csv += number(l.term.se) + "\n";
  }
  const auto& first = rep.levels.front();
  const auto& last = rep.levels.back();
  json j = {{"eps", rep.eps},
            {"replicas", rep.replicas},
            {"members", rep.members},
            {"tensor", tensor_json(rep.tensor)},
            {"coupling", rep.coupling},
            {"levels", rows},
            {"corrected_ratio_first_last", ratio(first.corrected.mean, last.corrected.mean)},
            {"plain_ratio_first_last", ratio(first.plain.mean, last.plain.mean)}};
  std::map<std::string, std::string> out{{"corrector.json", j.dump(2) + "\n"}, {"corrector.csv", csv}};
  if (plot_data) {
    std::string plot = "eps,plain,corrected\n";
    for (const auto& l : rep.levels) plot += number(l.eps) + "," + number(l.plain.mean) + "," + number(l.corrected.mean) + "\n";
    out["plot/corrector.csv"] = plot;
  }
  return out;
}

json environment_fingerprint() {
  struct utsname u {};
  uname(&u);
  return {{"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"fftw", std::string(fftw_version)},
          {"openssl", OpenSSL_version(OPENSSL_VERSION)},
          {"system", std::string(u.sysname) + " " + u.machine}};
}

json noise_json(const RunConfig& config) {
  const Simulation sim = config.simulation(config.eps.front());
  return {{"modes", sim.noise.modes()},
          {"gamma", sim.noise.gamma()},
          {"lambda0", sim.noise.lambda0()},
          {"partial_trace", partial_trace(sim.noise)},
          {"tail_trace_bound", sim.noise.tail_trace_bound()},
          {"law", to_string(config.noise_law)},
          {"sigma0", config.sigma0}};
}

json ensemble_json(const RunConfig& config) {
  return {{"members", config.members},
          {"replicas", config.replicas},
          {"seed_policy", "philox key from (seed, replica); counter carries (member, step draw)"},
          {"common_noise", config.common_noise},
          {"level_coupling", "synchronous: all eps-levels and the homogenized run share each member's noise"}};
}

json constraints_json(const RunConfig& config) {
  const double eps_min = config.eps.back();
  return {{"dt", config.stepper.dt},
          {"eps_min", eps_min},
          {"dt_over_eps_min", config.stepper.dt / eps_min},
          {"dt_over_eps_bound", 0.125},
          {"cells_per_period_min", config.grid.cells() * eps_min}};
}

}  // namespace

RawSet compute_raw(const std::string& command, const RunConfig& config, double eps) {
  if (command == "cell") return cell_raw(config);
  if (command == "simulate") return simulate_raw(config, std::isnan(eps) ? config.eps.front() : eps);
  if (command == "ladder" || command == "corrector") return ladder_raw(config);
  throw DomainError("unknown command '" + command + "'");
}

std::map<std::string, std::string> derive_outputs(const std::string& command, const RunConfig& config,
                                                  const RawSet& raw, bool plot_data) {
  if (command == "cell") return cell_outputs(config, raw);
  if (command == "simulate") return simulate_outputs(config, raw);
  if (command == "ladder") return ladder_outputs(raw, plot_data);
  if (command == "corrector") return corrector_outputs(raw, plot_data);
  throw DomainError("unknown command '" + command + "'");
}

void write_run(const fs::path& dir, const std::string& command, const RunConfig& config, const RawSet& raw,
               bool plot_data, double wall_seconds) {
  Archive ar(dir);
  ar.write("config.ini", config.canonical_text());
  json raw_names = json::array();
  for (const auto& [name, b] : raw) {
    ar.write_blob(name, b);
    raw_names.push_back(name);
  }
  json derived_names = json::array();
  for (const auto& [name, bytes] : derive_outputs(command, config, raw, plot_data)) {
    ar.write(name, bytes);
    derived_names.push_back(name);
  }
  json files = json::object();
  for (const auto& [name, digest] : ar.digests()) files[name] = digest;
  json manifest = {{"tool", "mvhom"},
                   {"version", MVHOM_VERSION},
                   {"command", command},
                   {"config_digest", config.digest()},
                   {"seed", config.seed},
                   {"plot_data", plot_data},
                   {"noise", noise_json(config)},
                   {"ensemble", ensemble_json(config)},
                   {"constraints", constraints_json(config)},
                   {"environment", environment_fingerprint()},
                   {"raw", raw_names},
                   {"derived", derived_names},
                   {"files", files}};
  Archive info(dir);
  info.write("manifest.json", manifest.dump(2) + "\n");
  json run_info = {{"wall_clock_seconds", wall_seconds}, {"workers", config.workers}, {"output", dir.string()}};
  info.write("run_info.json", run_info.dump(2) + "\n");
}

void regenerate_report(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IntegrityError("manifest.json", "missing from " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(mpath));
  } catch (const json::exception& e) {
    throw IntegrityError("manifest.json", std::string("unreadable: ") + e.what());
  }
  const std::string command = manifest.value("command", "");
  const json& files = manifest.at("files");
  auto verify = [&](const std::string& name) {
    if (!files.contains(name)) throw IntegrityError(name, "no digest recorded in the manifest");
    const fs::path p = dir / name;
    if (!fs::exists(p)) throw IntegrityError(name, "file missing (digest " + files[name].get<std::string>() + ")");
    if (sha256_file(p) != files[name].get<std::string>()) throw IntegrityError(name, "digest mismatch");
  };
  verify("config.ini");
  RawSet raw;
  for (const auto& n : manifest.at("raw")) {
    const std::string name = n.get<std::string>();
    verify(name);
    raw[name] = decode_blob(read_file(dir / name), name);
  }
  const RunConfig config = parse_config(read_file(dir / "config.ini"));
  if (config.digest() != manifest.value("config_digest", ""))
    throw IntegrityError("config.ini", "config digest differs from the manifest");
  Archive ar(dir);
  for (const auto& [name, bytes] : derive_outputs(command, config, raw, manifest.value("plot_data", false))) {
    ar.write(name, bytes);
    if (files.contains(name) && files[name].get<std::string>() != ar.digests().at(name))
      throw IntegrityError(name, "regenerated file differs from the recorded digest");
  }
}

std::string coefficient_csv(const RunConfig& config, double eps, double t) {
  const CoefficientField field = config.field();
  const GridSpec& g = config.grid;
  const int N = g.dim();
  std::string out = N == 1 ? "x1,a11\n" : "x1,x2,a11,a12,a22\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x1 = g.coordinate(i, 0), x2 = N == 2 ? g.coordinate(i, 1) : 0.0;
    const SymMatrix a = field.evaluate_scaled(x1, x2, t, eps);
    if (N == 1) {
      out += number(x1) + "," + number(a(0, 0)) + "\n";
    } else {
      out += number(x1) + "," + number(x2) + "," + number(a(0, 0)) + "," + number(a(0, 1)) + "," +
             number(a(1, 1)) + "\n";
    }
  }
  return out;
}

fs::path resolve_output(const std::string& command, const RunConfig& config, const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  const char* env = std::getenv("MVHOM_OUTPUT_ROOT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  if (!config.output.empty()) {
    const fs::path o(config.output);
    return o.is_absolute() || !(env && *env) ? o : root / o;
  }
  return root / (command + "-" + config.digest().substr(0, 12));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiscale homogenization toolkit for distribution-dependent stochastic PDEs", "mvhom"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MVHOM_VERSION);

  std::string config_path, out_dir, report_dir;
  std::int64_t seed = -1;
  int workers = 0;
  double eps = std::numeric_limits<double>::quiet_NaN();
  bool plot_data = false;

  // Numbers on the command line accept p/q, as in config files.
  const CLI::Validator fraction(
      [](std::string& text) {
        const auto slash = text.find('/');
        if (slash == std::string::npos) return std::string();
        double p = 0.0, q = 0.0;
        const char* end = text.data() + text.size();
        const auto rp = std::from_chars(text.data(), text.data() + slash, p);
        const auto rq = std::from_chars(text.data() + slash + 1, end, q);
        if (rp.ec != std::errc() || rp.ptr != text.data() + slash || rq.ec != std::errc() || rq.ptr != end ||
            q == 0.0)
          return "expected a number or p/q, got '" + text + "'";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", p / q);
        text = buf;
        return std::string();
      },
      "NUMBER or p/q");
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Run configuration file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Override run.seed");
    sub->add_option("--workers", workers, "Override run.workers");
  };
  auto* cell = app.add_subcommand("cell", "Solve the cell problems and write the effective tensor");
  add_common(cell);
  auto* simulate = app.add_subcommand("simulate", "Run one interacting ensemble at a single eps");
  add_common(simulate);
  simulate->add_option("--eps", eps, "Scale parameter (default: first run.epsilon)")->transform(fraction);
  auto* ladder_cmd = app.add_subcommand("ladder", "Run the eps-ladder against the homogenized problem");
  add_common(ladder_cmd);
  ladder_cmd->add_flag("--plot-data", plot_data, "Also write (eps, error) pairs for plotting");
  auto* corrector = app.add_subcommand("corrector", "Plain and corrector-reconstructed gradient residuals");
  add_common(corrector);
  corrector->add_flag("--plot-data", plot_data, "Also write residual pairs for plotting");
  auto* report = app.add_subcommand("report", "Verify an archive and regenerate its derived files");
  report->add_option("dir", report_dir, "Run directory")->required();
  double dump_t = 0.0;
  auto* dump = app.add_subcommand("dump", "Write a(x/eps, t/eps) sampled on the grid nodes as CSV");
  dump->add_option("config", config_path, "Run configuration file")->required();
  dump->add_option("--eps", eps, "Scale parameter (default: first run.epsilon)")->transform(fraction);
  dump->add_option("--t", dump_t, "Time")->transform(fraction);
  dump->add_option("--out", out_dir, "CSV file (default: stdout)");
  auto* check_cmd = app.add_subcommand("check", "Validate a config; print its canonical form and digest");
  check_cmd->add_option("config", config_path, "Run configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (report->parsed()) {
      regenerate_report(report_dir);
      out << json{{"status", "ok"}, {"dir", report_dir}}.dump() << "\n";
      return 0;
    }
    RunConfig config = load_config(config_path);
    if (seed >= 0) config = with_override(config, "run.seed", std::to_string(seed));
    if (workers > 0) config = with_override(config, "run.workers", std::to_string(workers));
    if (check_cmd->parsed()) {
      out << config.canonical_text() << "# digest " << config.digest() << "\n";
      return 0;
    }
    if (dump->parsed()) {
      const std::string csv = coefficient_csv(config, std::isnan(eps) ? config.eps.front() : eps, dump_t);
      if (out_dir.empty()) {
        out << csv;
      } else {
        Archive(fs::path(out_dir).parent_path().empty() ? fs::path(".") : fs::path(out_dir).parent_path())
            .write(fs::path(out_dir).filename().string(), csv);
      }
      return 0;
    }
    std::string command;
    for (const auto* sub : {cell, simulate, ladder_cmd, corrector})
      if (sub->parsed()) command = sub->get_name();
    const auto start = std::chrono::steady_clock::now();
    const RawSet raw = compute_raw(command, config, eps);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const fs::path dir = resolve_output(command, config, out_dir);
    write_run(dir, command, config, raw, plot_data, wall);
    json summary = {{"status", "ok"}, {"command", command}, {"dir", dir.string()}, {"config_digest", config.digest()}};
    if (command == "cell") summary["tensor"] = json::parse(derive_outputs(command, config, raw, false).at("cell.json"))["tensor"];
    out << summary.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    err << error_json(e) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << error_json(e) << "\n";
    return 3;
  }
}

}  // namespace mvhom
