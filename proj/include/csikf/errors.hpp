#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csikf {

/// Caller supplied something that violates a documented precondition
/// (dimension mismatch, out-of-range parameter, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a meaningful result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The configuration carries no information about the requested parameter
/// (singular Fisher information).
class UnidentifiableError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace csikf
