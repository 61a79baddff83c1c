#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsclab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (bad axis, grid mismatch, λ ≤ 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A metric constructor produced something that is not a Kähler metric.
class ConstructionError : public Error {
public:
    ConstructionError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

/// Metric lost positive definiteness at a grid point.
class SingularMetricError : public Error {
public:
    SingularMetricError(const std::string& what, std::size_t point)
        : Error(what), point_(point) {}
    std::size_t point() const noexcept { return point_; }

private:
    std::size_t point_;
};

/// ω̂ and ω₀ are not in the same Kähler class.
class CohomologyError : public Error {
public:
    using Error::Error;
};

class UnsupportedInputError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace hsclab
