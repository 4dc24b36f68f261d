#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polygan {

enum class ErrorKind {
  ShapeMismatch,
  SingularMatrix,
  NoConvergence,
  NegativeEigenvalue,
  NotSymmetric,
  Overflow,
  SingularRadius,
  MissingIndex,
  InvalidOrder,
  RankDeficientB,
  DuplicateCenters,
  NegativeEnergy,
  EmptyBatch,
  SizeMismatch,
  StaleCache,
  NonFiniteGradient,
  InvalidArgument,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the harness,
// the CLI exit-code mapping) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace polygan
