#pragma once

#include <stdexcept>
#include <string>

namespace csvreg {

/// Bad argument values, ill-formed specs, out-of-range labels.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Incompatible tensor/layer shapes; the message names both shapes.
struct DimensionError : ValidationError {
    using ValidationError::ValidationError;
};

/// Malformed binary input (IDX files, dataset containers, checkpoints).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a (label, attribute) group required by an estimator is empty.
struct AssumptionViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// API misuse (e.g. backward from a non-scalar root).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace csvreg
