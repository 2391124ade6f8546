#pragma once

#include <stdexcept>
#include <string>

namespace mii {

// Violated precondition: bad dimensions, empty inputs, out-of-range parameters.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Midpoint of (near-)antipodal vectors has no well-defined direction.
class UndefinedMidpointError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Pearson correlation with a constant input.
class UndefinedCorrelationError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Delaunay on collinear points or an affine map from a degenerate triangle.
class DegenerateGeometryError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace mii
