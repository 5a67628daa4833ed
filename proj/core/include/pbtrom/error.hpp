#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbtrom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    /// Short machine-readable category used in CLI error JSON.
    virtual const char* kind() const noexcept { return "error"; }
};

/// Two operands disagree on shape.
class ShapeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "shape_mismatch"; }
};

/// A precondition on a value (not a shape) was violated.
class ValueError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_value"; }
};

/// A file on disk is missing, truncated, tampered with or has the wrong version.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

/// Operation was called in a state that does not permit it (e.g. mutating a frozen column).
class StateError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_state"; }
};

inline std::string shape_str(std::ptrdiff_t rows, std::ptrdiff_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

} // namespace pbtrom
