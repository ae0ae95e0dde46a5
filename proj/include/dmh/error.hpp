#pragma once

#include <stdexcept>
#include <string>

namespace dmh {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes do not conform to an operation's rule.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(what) {}
};

// Value outside a function's mathematical domain (e.g. log of a non-positive number).
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(what) {}
};

// A stated precondition was violated by the caller.
struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error(what) {}
};

// A file does not conform to its on-disk format.
struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error(what) {}
};

// Filesystem-level failure (open/read/write).
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace dmh
