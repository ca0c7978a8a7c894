#pragma once

#include <stdexcept>
#include <string>

namespace teak {

/// Base of every error the library throws. The CLI maps the concrete type to
/// an exit code (2 schema/config, 3 numerical, 4 infeasible calibration).
class TeakError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or value outside an operation's domain.
class DomainError : public TeakError {
public:
    using TeakError::TeakError;
};

/// Flux without an interior peak, nonpositive area or nonpositive variance.
class DegenerateFluxError : public TeakError {
public:
    using TeakError::TeakError;
};

class GridMismatchError : public TeakError {
public:
    using TeakError::TeakError;
};

class RankDeficientError : public TeakError {
public:
    using TeakError::TeakError;
};

class ConvergenceError : public TeakError {
public:
    using TeakError::TeakError;
};

class InfeasibleError : public TeakError {
public:
    using TeakError::TeakError;
};

/// Simulator grid failed its Richardson self-check.
class AccuracyError : public TeakError {
public:
    using TeakError::TeakError;
};

/// Malformed CSV or configuration document.
class SchemaError : public TeakError {
public:
    using TeakError::TeakError;
};

class IoError : public TeakError {
public:
    using TeakError::TeakError;
};

} // namespace teak
