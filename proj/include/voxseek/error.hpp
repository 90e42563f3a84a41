#pragma once

#include <stdexcept>
#include <string>

namespace voxseek {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor/operation shape mismatch.
struct ShapeError : Error {
    using Error::Error;
};

/// API contract violation (e.g. non-scalar loss passed to backward).
struct ContractError : Error {
    using Error::Error;
};

/// Bad or empty input data.
struct InputError : Error {
    using Error::Error;
};

/// A resource budget was exceeded (e.g. voxel grid unit budget).
struct CapacityError : Error {
    using Error::Error;
};

/// Index or window outside its valid range.
struct BoundsError : Error {
    using Error::Error;
};

/// Non-finite value produced by a forward pass.
struct NumericError : Error {
    using Error::Error;
};

/// Training failure (divergence, non-finite gradient).
struct TrainingError : Error {
    using Error::Error;
};

/// Malformed file content (point clouds, checkpoints, configs).
struct FormatError : Error {
    using Error::Error;
};

/// Missing or inconsistent configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Synthetic scene construction failed (e.g. object placement).
struct GenerationError : Error {
    using Error::Error;
};

} // namespace voxseek
