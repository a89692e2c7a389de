#pragma once

#include <stdexcept>
#include <string>

namespace dcq {

// Shapes of two operands are incompatible.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A label or element index is outside its valid range.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Invalid hyperparameters or dataset settings.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Misuse of an API (e.g. backward on a non-scalar).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN/Inf where a finite value was required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file is truncated or fails its checksum.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint written by an incompatible format version.
struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dcq
