#pragma once

#include <stdexcept>
#include <string>

namespace chaincert {

// Numeric tolerances used across the library. Algebraic identities on
// 2x2/4x4 dense complex matrices hold to ~1e-15 in double precision, so
// 1e-12 leaves headroom; eigenvalue positivity gets the looser 1e-10.
inline constexpr double kAlgebraTol = 1e-12;
inline constexpr double kEigenTol = 1e-10;
inline constexpr double kTableTol = 1e-10;
inline constexpr double kSignalingTol = 1e-8;
inline constexpr double kIndependenceTol = 1e-8;
inline constexpr double kCertificationTol = 1e-9;

// Maximal quantum value of the three-input chained Bell expression.
inline const double kC3QuantumMax = 5.196152422706632;  // 3*sqrt(3)

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed document; message carries the JSON path of the offending node.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Problem size exceeds a hard enumeration/representation limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Behavior marginals are inconsistent across the other party's inputs.
class SignalingError : public Error {
 public:
  using Error::Error;
};

// Requested object cannot exist (e.g. POVM completeness is impossible).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace chaincert
