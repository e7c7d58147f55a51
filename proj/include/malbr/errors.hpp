#pragma once

#include <stdexcept>
#include <string>

namespace malbr {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// lattice
struct InvalidVector : Error { using Error::Error; };
struct NoDecomposition : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct ReductionDiverged : Error { using Error::Error; };
struct EmptyStencil : Error { using Error::Error; };
struct LatticeOverflow : Error { using Error::Error; };

// grid
struct DomainTooSmall : Error { using Error::Error; };
struct InvalidStencilConfig : Error { using Error::Error; };

// schemes
struct DomainError : Error { using Error::Error; };
struct InvalidStencil : Error { using Error::Error; };

// solver
struct InitializationFailed : Error { using Error::Error; };
struct LinearSolveFailed : Error { using Error::Error; };
struct PreconditionViolation : Error { using Error::Error; };

// harness
struct UnknownCase : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace malbr
