#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mvhom/cell.hpp"
#include "mvhom/diagnostics.hpp"
#include "mvhom/integrator.hpp"

namespace mvhom {

/// Parsed, validated run configuration. The file grammar is INI-like:
///
///   # comment            (also ';', and trailing " #..." after a value)
///   [section]
///   key = value
///
/// Lists are comma separated; numbers accept the form p/q. See
/// docs/config.md for every key and its default.
struct RunConfig {
  /// section.key -> canonical value text, every known key present.
  std::map<std::string, std::string> values;

  // Typed views, filled by parse_config.
  GridSpec grid{1, 1024};
  CoefficientFamily family = CoefficientFamily::Layered;
  CoefficientParams params;
  double kappa = 1.0;
  CellGrid cell{1, 256, 1};
  double cell_tol = 1e-10;
  ModelVariant variant = ModelVariant::AllenCahn;
  bool drag = true, cubic = true;
  DriftConstants drift;
  NoiseLaw noise_law = NoiseLaw::ScalarMultiplicative;
  double sigma0 = 0.1;
  std::size_t noise_modes = 64;
  double noise_gamma = 2.0, noise_lambda0 = 1.0;
  StepperConfig stepper;
  InitialCondition initial;
  std::size_t members = 8;
  bool common_noise = false;
  std::size_t replicas = 32;
  std::vector<double> eps;
  std::uint64_t seed = 20260101;
  int workers = 1;
  std::string output;
  std::vector<long> lags;

  CoefficientField field() const;
  /// One ensemble at the given eps (replica r).
  Simulation simulation(double eps, std::uint64_t replica = 0) const;
  LadderConfig ladder() const;

  /// Sections and keys in sorted order, defaults filled, without the keys
  /// that cannot change results (run.workers, run.output).
  std::string canonical_text() const;
  /// SHA-256 hex of canonical_text(); invariant under key order, comments
  /// and the worker count.
  std::string digest() const;
};

/// ParseError (with line) on malformed text or unknown keys, ValidationError
/// (with the dotted key) on values that violate a component invariant.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Replaces one key (dotted) and revalidates; used for --seed.
RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value);

}  // namespace mvhom
