#pragma once

#include <stdexcept>
#include <string>

namespace flockhydro {

/// Base of every error the library raises. `kind()` is the stable short
/// name used in CLI diagnostics (e.g. "VacuumCell").
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Failure of a numerical procedure on valid input (maps to exit code 1).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Invalid argument or precondition violation.
class DomainError : public Error {
public:
  explicit DomainError(const std::string& what) : Error("DomainError", what) {}
};

class ConfigError : public Error {
public:
  ConfigError(const std::string& key, const std::string& reason)
      : Error("ConfigError", key.empty() ? reason : key + ": " + reason), key_(key),
        reason_(reason) {}

  const std::string& key() const noexcept { return key_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string key_;
  std::string reason_;
};

class FormatError : public Error {
public:
  explicit FormatError(const std::string& what) : Error("FormatError", what) {}
};

#define FLOCKHYDRO_NUMERICAL_ERROR(Name)                                                         \
  class Name : public NumericalError {                                                          \
  public:                                                                                        \
    explicit Name(const std::string& what) : NumericalError(#Name, what) {}                      \
  };

FLOCKHYDRO_NUMERICAL_ERROR(NonconfiningPotential)
FLOCKHYDRO_NUMERICAL_ERROR(IntegrandError)
FLOCKHYDRO_NUMERICAL_ERROR(SingularAssembly)
FLOCKHYDRO_NUMERICAL_ERROR(NoConvergence)
FLOCKHYDRO_NUMERICAL_ERROR(AxisEvaluation)
FLOCKHYDRO_NUMERICAL_ERROR(MomentConstraintViolated)
FLOCKHYDRO_NUMERICAL_ERROR(DegenerateDenominator)
FLOCKHYDRO_NUMERICAL_ERROR(NoInteriorMinimum)
FLOCKHYDRO_NUMERICAL_ERROR(ZeroOrientation)
FLOCKHYDRO_NUMERICAL_ERROR(VacuumCell)
FLOCKHYDRO_NUMERICAL_ERROR(StiffStep)

#undef FLOCKHYDRO_NUMERICAL_ERROR

}  // namespace flockhydro
