#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "mvhom/archive.hpp"
#include "mvhom/config.hpp"
#include "mvhom/errors.hpp"

namespace mvhom {

/// 2 for configuration and I/O errors, 4 for integrity errors, 3 otherwise.
int exit_code(ErrorKind kind) noexcept;

/// Machine-readable error object written to stderr by the CLI.
std::string error_json(const std::exception& e);

/// Raw arrays of one subcommand, by archive-relative file name.
using RawSet = std::map<std::string, Blob>;

/// Computes the raw arrays of `command` (cell, simulate, ladder, corrector).
/// `eps` selects the level for simulate (NaN: first configured eps).
RawSet compute_raw(const std::string& command, const RunConfig& config, double eps);

/// Human-facing files derived from raw arrays only, by file name.
std::map<std::string, std::string> derive_outputs(const std::string& command, const RunConfig& config,
                                                  const RawSet& raw, bool plot_data);

/// Writes config.ini, raw/, derived files and manifest.json (plus the
/// non-reproducible run_info.json) into `dir`.
void write_run(const std::filesystem::path& dir, const std::string& command, const RunConfig& config,
               const RawSet& raw, bool plot_data, double wall_seconds);

/// Verifies every raw file and config.ini against manifest.json, then
/// regenerates the derived files. IntegrityError names the first bad file.
void regenerate_report(const std::filesystem::path& dir);

/// CSV of a(x/eps, t/eps) at every grid node of `config`.
std::string coefficient_csv(const RunConfig& config, double eps, double t);

/// Output directory: --out, else run.output (relative to $MVHOM_OUTPUT_ROOT
/// when set), else $MVHOM_OUTPUT_ROOT or ./runs, joined with
/// <command>-<digest prefix>.
std::filesystem::path resolve_output(const std::string& command, const RunConfig& config,
                                     const std::string& out_flag);

/// The whole command line; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvhom
