#pragma once

#include <stdexcept>
#include <string>

namespace ewa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value left its admissible domain (natural parameter outside Theta, etc.).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Sizes of vectors/matrices disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data failed validation (response values, CSV parsing).
class DataError : public Error {
public:
    using Error::Error;
};

/// Sampling failed (retry exhaustion, all proposals rejected, bad init).
class SamplingError : public Error {
public:
    using Error::Error;
};

/// Iterative numerical routine did not converge.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations)
        : Error(what), iterations_(iterations) {}
    int iterations() const noexcept { return iterations_; }

private:
    int iterations_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ewa
