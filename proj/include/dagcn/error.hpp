#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dagcn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A precondition on values (not shapes) was violated.
class ContractError : public Error {
public:
    using Error::Error;
};

/// An object was used in a state that forbids the call, e.g. a consumed tape.
class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Structurally valid tokens that describe an invalid dataset.
class FormatError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class StratificationError : public Error {
public:
    using Error::Error;
};

std::string shape_string(std::size_t rows, std::size_t cols);

}  // namespace dagcn
