#pragma once

#include <stdexcept>
#include <string>

namespace cxrssl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Missing, corrupt, or inconsistent input data (images, manifests, checkpoints).
class DataError : public Error {
public:
    using Error::Error;
};

/// Tensor or parameter shapes that do not agree.
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Input for which the requested quantity is undefined (zero-norm vectors, sigma <= 0, ...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// NaN or Inf encountered during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace cxrssl
