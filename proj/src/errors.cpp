#include "mvhom/errors.hpp"

namespace mvhom {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EllipticityViolation: return "EllipticityViolation";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
    case ErrorKind::NotDivergenceFree: return "NotDivergenceFree";
    case ErrorKind::ContractViolation: return "ContractViolation";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::Integrity: return "IntegrityError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace mvhom
