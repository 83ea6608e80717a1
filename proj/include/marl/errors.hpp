#pragma once

#include <stdexcept>
#include <string>

namespace marl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad key, out-of-range value, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numeric parameter outside its admissible domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// The chain induced by a policy has no unique stationary distribution.
class NonUnichainError : public Error {
public:
    using Error::Error;
};

/// Iterative method did not converge or a tolerance check failed.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// LP reported infeasible / unbounded, or another solver-level failure.
class SolverError : public Error {
public:
    using Error::Error;
};

/// An invariant that the caller cannot violate was broken internally.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace marl
