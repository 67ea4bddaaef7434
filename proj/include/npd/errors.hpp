#pragma once

#include <stdexcept>
#include <string>

namespace npd {

// Error taxonomy mapped to CLI exit codes:
//   MissingArtifact -> 2, Validation/Staleness/Provenance -> 3, Numerical -> 4,
//   everything else -> 1.
enum class ErrorKind {
  Config,
  Input,
  Parse,
  MissingArtifact,
  Validation,
  Staleness,
  Provenance,
  Numerical,
  FilterStarvation,
};

class NpdError : public std::runtime_error {
public:
  NpdError(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrorKind::MissingArtifact: return 2;
      case ErrorKind::Validation:
      case ErrorKind::Staleness:
      case ErrorKind::Provenance: return 3;
      case ErrorKind::Numerical: return 4;
      default: return 1;
    }
  }

  const char* kind_name() const {
    switch (kind_) {
      case ErrorKind::Config: return "config";
      case ErrorKind::Input: return "input";
      case ErrorKind::Parse: return "parse";
      case ErrorKind::MissingArtifact: return "missing_artifact";
      case ErrorKind::Validation: return "validation";
      case ErrorKind::Staleness: return "staleness";
      case ErrorKind::Provenance: return "provenance";
      case ErrorKind::Numerical: return "numerical";
      case ErrorKind::FilterStarvation: return "filter_starvation";
    }
    return "unknown";
  }

private:
  ErrorKind kind_;
};

}  // namespace npd
