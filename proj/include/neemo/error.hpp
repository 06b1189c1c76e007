#pragma once

#include <stdexcept>
#include <string>

namespace neemo {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (dimensions, weights, files).
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid structural configuration (group sizes, sample counts, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File parse failure; carries the 1-based line number when known.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Non-finite values, divergence, solver breakdown.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// API used in the wrong order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace neemo
