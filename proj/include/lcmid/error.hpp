#pragma once

#include <stdexcept>
#include <string>

namespace lcmid {

// Malformed or inconsistent input (dimensions, normalizations, file syntax).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// File parse failure with a source location.
class ParseError : public InvalidInput {
public:
    ParseError(const std::string& source, int line, int column, const std::string& what)
        : InvalidInput(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

// A computation would exceed a configured size or search budget.
class CapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lcmid
