#pragma once

#include <stdexcept>
#include <string>

namespace enduro {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Glyc knot table violates ordering or range requirements.
class InvalidCurve : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Array lengths inconsistent with the mesh or decision layout.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration, parameter set or input file.
class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace enduro
