#pragma once

#include <stdexcept>
#include <string>

namespace fsipl {

// Bad caller input: dimension mismatches, infeasible starting points,
// malformed configuration values.
class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerically degenerate projection target (rank-deficient matrix for the
// orthonormal-columns manifold).
class DegenerateProjectionError : public std::runtime_error {
 public:
  explicit DegenerateProjectionError(const std::string& what) : std::runtime_error(what) {}
};

// A reference oracle could not certify its own answer (e.g. multi-start
// subproblem solves disagreeing beyond tolerance).
class OracleFailureError : public std::runtime_error {
 public:
  explicit OracleFailureError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fsipl
