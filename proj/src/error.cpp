#include "polygan/error.hpp"

namespace polygan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::SingularRadius: return "SingularRadius";
    case ErrorKind::MissingIndex: return "MissingIndex";
    case ErrorKind::InvalidOrder: return "InvalidOrder";
    case ErrorKind::RankDeficientB: return "RankDeficientB";
    case ErrorKind::DuplicateCenters: return "DuplicateCenters";
    case ErrorKind::NegativeEnergy: return "NegativeEnergy";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace polygan
