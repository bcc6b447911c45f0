#pragma once

#include <stdexcept>
#include <string>

namespace psycontour {

// Base for all library failures. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: missing files, malformed rows, inconsistent resources.
class DataError : public Error {
public:
    using Error::Error;
};

// NaN/Inf detected, singular systems, non-convergence that invalidates results.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or API misuse (wrong shapes, unfitted objects).
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace psycontour
