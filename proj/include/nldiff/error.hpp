#pragma once

#include <stdexcept>
#include <string>

namespace nldiff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or argument violates a documented constraint.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A convolution plan was used with a grid or kernel it was not built for.
class PlanMismatch : public Error {
public:
    using Error::Error;
};

/// An iterative construction (search, solve) did not reach its target.
class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// The time stepper detected NaN/overflow or mass leaking out of the box.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Persistence errors.
class SnapshotError : public Error {
public:
    using Error::Error;
};

class SnapshotCorrupt : public SnapshotError {
public:
    using SnapshotError::SnapshotError;
};

class SnapshotIncompatible : public SnapshotError {
public:
    using SnapshotError::SnapshotError;
};

/// Configuration text failed to parse or validate; carries the 1-based line.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace nldiff
