#pragma once

#include <stdexcept>
#include <string>

namespace pdg {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A function argument violated its documented precondition.
struct InvalidInputError : Error {
    using Error::Error;
};

/// The vehicle state is outside the model's domain (e.g. m <= 0).
struct SingularStateError : Error {
    using Error::Error;
};

/// Numerical integration produced non-finite values.
struct PropagationError : Error {
    using Error::Error;
};

/// Degenerate scaling units (e.g. ||r0|| = 0).
struct ScalingError : Error {
    using Error::Error;
};

/// A linearization point is invalid (e.g. zero reference thrust).
struct LinearizationError : Error {
    using Error::Error;
};

/// The sequence model produced a non-finite frame.
struct GenerationError : Error {
    using Error::Error;
};

/// The conic backend failed in a way the caller cannot iterate past.
struct SolverError : Error {
    using Error::Error;
};

/// File I/O or (de)serialization failure.
struct IoError : Error {
    using Error::Error;
};

/// Malformed or inconsistent run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace pdg
