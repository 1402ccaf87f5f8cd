#pragma once

#include <stdexcept>
#include <string>

namespace mvhom {

enum class ErrorKind {
  Domain,
  NonFinite,
  EllipticityViolation,
  SolverDiverged,
  NotDivergenceFree,
  ContractViolation,
  CountMismatch,
  StepRejected,
  Parse,
  Validation,
  Integrity,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the toolkit. The kind selects the CLI exit
/// code (config errors 2, solver errors 3, integrity errors 4).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& what) : Error(ErrorKind::NonFinite, what) {}
};

class EllipticityViolation : public Error {
 public:
  EllipticityViolation(const std::string& what, double y1, double y2, double tau,
                       double value)
      : Error(ErrorKind::EllipticityViolation, what),
        y1(y1), y2(y2), tau(tau), value(value) {}

  double y1, y2, tau;  // offending sample point
  double value;        // min eigenvalue found there
};

class SolverDiverged : public Error {
 public:
  SolverDiverged(const std::string& what, int iterations, double residual)
      : Error(ErrorKind::SolverDiverged, what),
        iterations(iterations), residual(residual) {}

  int iterations;
  double residual;
};

class NotDivergenceFree : public Error {
 public:
  NotDivergenceFree(const std::string& what, double divergence)
      : Error(ErrorKind::NotDivergenceFree, what), divergence(divergence) {}

  double divergence;
};

class ContractViolation : public Error {
 public:
  ContractViolation(const std::string& inequality, double violation)
      : Error(ErrorKind::ContractViolation,
              "contract violated: " + inequality + " (excess " +
                  std::to_string(violation) + ")"),
        inequality(inequality), violation(violation) {}

  std::string inequality;
  double violation;
};

class CountMismatch : public Error {
 public:
  explicit CountMismatch(const std::string& what)
      : Error(ErrorKind::CountMismatch, what) {}
};

class StepRejected : public Error {
 public:
  StepRejected(const std::string& what, double guard)
      : Error(ErrorKind::StepRejected, what), guard(guard) {}

  double guard;
};

/// Config text could not be read. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error(ErrorKind::Parse,
              (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + what),
        line(line) {}

  int line;
};

/// Config parsed but a value breaks an invariant. `key` is `section.key`.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& key, const std::string& what)
      : Error(ErrorKind::Validation, key + ": " + what), key(key) {}

  std::string key;
};

class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& file, const std::string& what)
      : Error(ErrorKind::Integrity, file + ": " + what), file(file) {}

  std::string file;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace mvhom
