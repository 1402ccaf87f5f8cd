#include "mvhom/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mvhom/archive.hpp"
#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

enum class Kind { Int, Double, Bool, String, DoubleList, IntList };

struct KeySpec {
  const char* key;
  Kind kind;
  const char* fallback;
  bool digest = true;  // part of the content digest
};

// Every recognized key with its default. Execution-only keys (worker count,
// output location) are excluded from the digest.
const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"grid.dim", Kind::Int, "1"},
      {"grid.n", Kind::Int, "1024"},
      {"coefficient.family", Kind::String, "layered"},
      {"coefficient.c", Kind::Double, "1"},
      {"coefficient.alpha", Kind::Double, "2"},
      {"coefficient.beta", Kind::Double, "1"},
      {"coefficient.gamma", Kind::Double, "2"},
      {"coefficient.delta", Kind::Double, "1"},
      {"coefficient.low", Kind::Double, "1"},
      {"coefficient.high", Kind::Double, "4"},
      {"coefficient.width", Kind::Double, "0.05"},
      {"coefficient.kappa", Kind::String, "auto"},
      {"cell.m", Kind::Int, "256"},
      {"cell.slices", Kind::Int, "1"},
      {"cell.tol", Kind::Double, "1e-10"},
      {"model.variant", Kind::String, "allen_cahn"},
      {"model.drag", Kind::Bool, "true"},
      {"model.cubic", Kind::Bool, "true"},
      {"model.eta", Kind::Double, "0.1"},
      {"model.ell", Kind::Double, "0.1"},
      {"model.noise_law", Kind::String, "scalar_multiplicative"},
      {"model.sigma0", Kind::Double, "0.1"},
      {"noise.modes", Kind::Int, "64"},
      {"noise.gamma", Kind::Double, "2"},
      {"noise.lambda0", Kind::Double, "1"},
      {"stepper.dt", Kind::Double, "1e-4"},
      {"stepper.T", Kind::Double, "0.25"},
      {"stepper.tol", Kind::Double, "1e-12"},
      {"stepper.p", Kind::Int, "4"},
      {"initial.shape", Kind::String, "sine"},
      {"initial.amplitude", Kind::Double, "1"},
      {"initial.spread", Kind::Double, "0"},
      {"initial.seed", Kind::Int, "0"},
      {"ensemble.members", Kind::Int, "8"},
      {"ensemble.common_noise", Kind::Bool, "false"},
      {"run.replicas", Kind::Int, "32"},
      {"run.epsilon", Kind::DoubleList, "1/8, 1/16, 1/32"},
      {"run.seed", Kind::Int, "20260101"},
      {"run.workers", Kind::Int, "1", false},
      {"run.output", Kind::String, "", false},
      {"diagnostics.lags", Kind::IntList, "1, 2, 4, 8, 16"},
  };
  return keys;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : schema())
    if (key == k.key) return &k;
  return nullptr;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Validation failures are raised against a key.
[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw ValidationError(key, what);
}

bool parse_number(const std::string& text, double& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc()) return false;
  if (r.ptr == e) return std::isfinite(out);
  if (*r.ptr != '/') return false;
  double q;
  auto r2 = std::from_chars(r.ptr + 1, e, q);
  if (r2.ec != std::errc() || r2.ptr != e || q == 0.0) return false;
  out /= q;
  return std::isfinite(out);
}

bool parse_integer(const std::string& text, long long& out) {
  const char* b = text.data();
  const char* e = b + text.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string cur;
  std::istringstream ss(text);
  while (std::getline(ss, cur, ',')) items.push_back(trim(cur));
  if (items.size() == 1 && items[0].empty()) items.clear();
  return items;
}

// Canonical text of one value; ValidationError on a type mismatch.
std::string canonicalize(const KeySpec& spec, const std::string& raw) {
  const std::string key = spec.key;
  switch (spec.kind) {
    case Kind::Int: {
      long long v;
      if (!parse_integer(raw, v)) invalid(key, "expected an integer, got '" + raw + "'");
      return std::to_string(v);
    }
    case Kind::Double: {
      double v;
      if (!parse_number(raw, v)) invalid(key, "expected a number, got '" + raw + "'");
      return format_double(v);
    }
    case Kind::Bool: {
      std::string s = raw;
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      if (s == "true" || s == "yes" || s == "on" || s == "1") return "true";
      if (s == "false" || s == "no" || s == "off" || s == "0") return "false";
      invalid(key, "expected a boolean, got '" + raw + "'");
    }
    case Kind::String:
      return raw;
    case Kind::DoubleList:
    case Kind::IntList: {
      std::string out;
      for (const auto& item : split_list(raw)) {
        if (!out.empty()) out += ", ";
        if (spec.kind == Kind::DoubleList) {
          double v;
          if (!parse_number(item, v)) invalid(key, "expected a list of numbers, got '" + item + "'");
          out += format_double(v);
        } else {
          long long v;
          if (!parse_integer(item, v)) invalid(key, "expected a list of integers, got '" + item + "'");
          out += std::to_string(v);
        }
      }
      return out;
    }
  }
  return raw;
}

double as_double(const std::map<std::string, std::string>& v, const std::string& key) {
  double out;
  parse_number(v.at(key), out);
  return out;
}

long long as_int(const std::map<std::string, std::string>& v, const std::string& key) {
  long long out;
  parse_integer(v.at(key), out);
  return out;
}

bool as_bool(const std::map<std::string, std::string>& v, const std::string& key) {
  return v.at(key) == "true";
}

template <class Fn>
void check(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    invalid(key, e.what());
  }
}

// Typed fields from canonical values, then cross-component validation.
void bind(RunConfig& c) {
  const auto& v = c.values;
  check("grid.n", [&] {
    c.grid = GridSpec(static_cast<int>(as_int(v, "grid.dim")), static_cast<int>(as_int(v, "grid.n")));
  });
  const int dim = c.grid.dim();

  check("coefficient.family", [&] { c.family = parse_family(v.at("coefficient.family")); });
  c.params.c = as_double(v, "coefficient.c");
  c.params.alpha = as_double(v, "coefficient.alpha");
  c.params.beta = as_double(v, "coefficient.beta");
  c.params.gamma = as_double(v, "coefficient.gamma");
  c.params.delta = as_double(v, "coefficient.delta");
  c.params.low = as_double(v, "coefficient.low");
  c.params.high = as_double(v, "coefficient.high");
  c.params.width = as_double(v, "coefficient.width");
  const double bound = analytic_kappa(dim, c.family, c.params);
  if (!(bound > 0.0)) {
    const char* culprit = c.family == CoefficientFamily::Constant       ? "coefficient.c"
                          : c.family == CoefficientFamily::Checkerboard ? "coefficient.low"
                                                                        : "coefficient.beta";
    invalid(culprit, "family parameters are not uniformly elliptic (lower bound " + format_double(bound) + ")");
  }
  if (c.family == CoefficientFamily::Checkerboard && !(c.params.width > 0.0))
    invalid("coefficient.width", "must be positive");
  const std::string& kappa_text = v.at("coefficient.kappa");
  if (kappa_text == "auto") {
    c.kappa = bound;
  } else {
    if (!parse_number(kappa_text, c.kappa)) invalid("coefficient.kappa", "expected a number or 'auto'");
    if (!(c.kappa > 0.0)) invalid("coefficient.kappa", "must be positive");
    if (c.kappa > bound * (1.0 + 1e-12))
      invalid("coefficient.kappa", "declared kappa exceeds the family's ellipticity bound " +
                                       format_double(bound));
  }

  c.cell = CellGrid{dim, static_cast<int>(as_int(v, "cell.m")), static_cast<int>(as_int(v, "cell.slices"))};
  check("cell.m", [&] { c.cell.validate(); });
  c.cell_tol = as_double(v, "cell.tol");
  if (!(c.cell_tol > 0.0)) invalid("cell.tol", "must be positive");

  const std::string& variant = v.at("model.variant");
  if (variant == "allen_cahn") {
    c.variant = ModelVariant::AllenCahn;
  } else if (variant == "navier_stokes_2d") {
    c.variant = ModelVariant::NavierStokes2D;
    if (dim != 2) invalid("model.variant", "navier_stokes_2d needs grid.dim = 2");
  } else {
    invalid("model.variant", "expected allen_cahn or navier_stokes_2d");
  }
  c.drag = as_bool(v, "model.drag");
  c.cubic = as_bool(v, "model.cubic");
  c.drift = DriftConstants{c.kappa, as_double(v, "model.eta"), as_double(v, "model.ell")};
  if (!(c.drift.eta >= 0.0) || !(c.drift.eta < c.kappa / 2.0))
    invalid("model.eta", "must satisfy 0 <= eta < kappa/2 (kappa = " + format_double(c.kappa) + ")");
  if (c.drift.violation())
    invalid("model.ell", "local monotonicity budget requires 0 <= ell < (kappa - 2 eta)/2 = " +
                             format_double((c.kappa - 2.0 * c.drift.eta) / 2.0));
  const std::string& law = v.at("model.noise_law");
  if (law == "scalar_multiplicative") c.noise_law = NoiseLaw::ScalarMultiplicative;
  else if (law == "mode_modulated") c.noise_law = NoiseLaw::ModeModulated;
  else invalid("model.noise_law", "expected scalar_multiplicative or mode_modulated");
  c.sigma0 = as_double(v, "model.sigma0");
  if (!(c.sigma0 >= 0.0)) invalid("model.sigma0", "must be nonnegative");

  const long long modes = as_int(v, "noise.modes");
  if (modes < 1 || static_cast<std::size_t>(modes) > c.grid.size())
    invalid("noise.modes", "must be between 1 and the number of grid unknowns");
  c.noise_modes = static_cast<std::size_t>(modes);
  c.noise_gamma = as_double(v, "noise.gamma");
  if (!(c.noise_gamma > 1.0)) invalid("noise.gamma", "must exceed 1 for a trace-class covariance");
  c.noise_lambda0 = as_double(v, "noise.lambda0");
  if (!(c.noise_lambda0 > 0.0)) invalid("noise.lambda0", "must be positive");

  c.stepper.dt = as_double(v, "stepper.dt");
  c.stepper.horizon = as_double(v, "stepper.T");
  c.stepper.tol = as_double(v, "stepper.tol");
  c.stepper.moment_order = static_cast<int>(as_int(v, "stepper.p"));
  if (!(c.stepper.dt > 0.0)) invalid("stepper.dt", "must be positive");
  if (c.stepper.moment_order < 2) invalid("stepper.p", "moment order must be at least 2");
  check("stepper.T", [&] { c.stepper.validate(); });

  c.initial.shape = v.at("initial.shape");
  if (c.initial.shape != "sine" && c.initial.shape != "random")
    invalid("initial.shape", "expected sine or random");
  c.initial.amplitude = as_double(v, "initial.amplitude");
  c.initial.spread = as_double(v, "initial.spread");
  c.initial.seed = static_cast<std::uint64_t>(as_int(v, "initial.seed"));

  const long long members = as_int(v, "ensemble.members");
  if (members < 1) invalid("ensemble.members", "must be at least 1");
  c.members = static_cast<std::size_t>(members);
  c.common_noise = as_bool(v, "ensemble.common_noise");

  const long long replicas = as_int(v, "run.replicas");
  if (replicas < 1) invalid("run.replicas", "must be at least 1");
  c.replicas = static_cast<std::size_t>(replicas);
  c.eps.clear();
  for (const auto& item : split_list(v.at("run.epsilon"))) {
    double e;
    parse_number(item, e);
    c.eps.push_back(e);
  }
  if (c.eps.empty()) invalid("run.epsilon", "list is empty");
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    if (!(c.eps[i] > 0.0)) invalid("run.epsilon", "values must be positive");
    if (i > 0 && !(c.eps[i] < c.eps[i - 1])) invalid("run.epsilon", "list must be strictly decreasing");
  }
  const double smallest = c.eps.back();
  if (c.grid.cells() * smallest < 16.0 - 1e-9)
    invalid("grid.n", "needs n >= 16/eps = " + format_double(16.0 / smallest) + " for the smallest epsilon");
  if (c.stepper.dt > smallest / 8.0 * (1.0 + 1e-12))
    invalid("stepper.dt", "needs dt <= eps/8 = " + format_double(smallest / 8.0) + " for the smallest epsilon");
  c.seed = static_cast<std::uint64_t>(as_int(v, "run.seed"));
  const long long workers = as_int(v, "run.workers");
  if (workers < 1) invalid("run.workers", "must be at least 1");
  c.workers = static_cast<int>(workers);
  c.output = v.at("run.output");

  c.lags.clear();
  for (const auto& item : split_list(v.at("diagnostics.lags"))) {
    long long l;
    parse_integer(item, l);
    c.lags.push_back(static_cast<long>(l));
  }
  {
    auto sorted = c.lags;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() < 4 || sorted.front() < 1 ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        sorted.back() < 10 * sorted.front())
      invalid("diagnostics.lags", "needs at least 4 distinct positive lags spanning a decade");
    if (sorted.back() >= c.stepper.steps())
      invalid("diagnostics.lags", "largest lag must be shorter than the run");
  }
  check("model", [&] {
    ModelSpec probe;
    probe.variant = c.variant;
    probe.field = c.field();
    probe.eps = smallest;
    probe.drift = c.drift;
    probe.sigma0 = c.sigma0;
    probe.validate(c.grid);
  });
}

}  // namespace

CoefficientField RunConfig::field() const { return CoefficientField(grid.dim(), family, params, kappa); }

Simulation RunConfig::simulation(double e, std::uint64_t replica) const {
  Simulation s;
  s.grid = grid;
  s.model.variant = variant;
  s.model.field = field();
  s.model.eps = e;
  s.model.drag = drag;
  s.model.cubic = cubic;
  s.model.drift = drift;
  s.model.noise_law = noise_law;
  s.model.sigma0 = sigma0;
  s.noise = QWienerSpec(grid, noise_modes, noise_lambda0, noise_gamma, seed);
  s.stepper = stepper;
  s.initial = initial;
  s.members = members;
  s.common_noise = common_noise;
  s.seed = seed;
  s.replica = replica;
  s.level = 0;
  s.workers = workers;
  return s;
}

LadderConfig RunConfig::ladder() const {
  LadderConfig l;
  l.base = simulation(eps.front());
  l.eps = eps;
  l.replicas = replicas;
  l.cell = cell;
  l.cell_tol = cell_tol;
  return l;
}

std::string RunConfig::canonical_text() const {
  std::string out, section;
  for (const auto& [k, val] : values) {
    const KeySpec* spec = find_key(k);
    if (!spec || !spec->digest) continue;
    const auto dot = k.find('.');
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += k.substr(dot + 1) + " = " + val + "\n";
  }
  return out;
}

std::string RunConfig::digest() const { return sha256_hex(canonical_text()); }

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::map<std::string, std::string> raw;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty()) throw ParseError(lineno, "empty section name");
      bool known = false;
      for (const auto& k : schema())
        if (std::string(k.key).rfind(section + ".", 0) == 0) known = true;
      if (!known) throw ParseError(lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    if (section.empty()) throw ParseError(lineno, "key outside of any section");
    const std::string name = trim(std::string_view(s).substr(0, eq));
    std::string value = trim(std::string_view(s).substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(std::string_view(value).substr(0, hash));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    const std::string key = section + "." + name;
    if (!find_key(key)) throw ParseError(lineno, "unknown key '" + name + "' in [" + section + "]");
    if (raw.count(key)) throw ParseError(lineno, "duplicate key '" + key + "'");
    raw[key] = value;
  }
  for (const auto& spec : schema()) {
    auto it = raw.find(spec.key);
    const std::string value = it == raw.end() ? spec.fallback : it->second;
    c.values[spec.key] = canonicalize(spec, value);
  }
  bind(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ValidationError(key, "unknown key");
  RunConfig c = config;
  c.values[key] = canonicalize(*spec, value);
  bind(c);
  return c;
}

}  // namespace mvhom
