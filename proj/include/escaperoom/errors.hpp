#pragma once

#include <stdexcept>
#include <string>

namespace escaperoom {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries a 1-based line/column when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = 0, int column = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ")"
                         : msg),
          line(line),
          column(column) {}

    int line;
    int column;
};

/// Structurally well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Procedural generation could not realize the requested world.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Singular or otherwise unsolvable linear system.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An API was driven outside its contract (e.g. stepping a finished episode).
class ContractViolation : public Error {
public:
    using Error::Error;
};

}  // namespace escaperoom
