#pragma once

#include <stdexcept>
#include <string>

namespace bt {

// Invalid user-facing parameters (dimension, ring sizes, scheme knobs).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Evaluation at a declared singularity, e.g. the Kelvin transform at the origin.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A numerical check or solve that did not meet its contract.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bt
