#pragma once

#include <stdexcept>
#include <string>

namespace uncharted {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: unreadable files, ragged rows, bad values, unknown names.
class DataError : public Error {
public:
    using Error::Error;
};

/// The input is well formed but the requested analysis is undefined on it
/// (a single class block, a constant series, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// A precondition on the arguments of a call was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace uncharted
