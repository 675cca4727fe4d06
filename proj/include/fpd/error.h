#pragma once

#include <stdexcept>
#include <string>

namespace fpd {

// Base for every error raised by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numeric argument outside its documented domain (negative sigma, lambda < 0, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Tensor or image dimensions that do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A call sequence that violates an API contract (e.g. backward on an inference cache).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (corpus layout, config documents).
class DataError : public Error {
public:
    using Error::Error;
};

enum class ParseErrorKind { BadMagic, Truncated, BadMaxval, BadHeader };

const char* to_string(ParseErrorKind kind);

// Image and packed-dataset decoding failures.
class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ParseErrorKind kind() const noexcept { return kind_; }

private:
    ParseErrorKind kind_;
};

enum class CheckpointErrorKind { BadMagic, UnsupportedVersion, Truncated, Malformed, ArchitectureMismatch };

const char* to_string(CheckpointErrorKind kind);

class CheckpointError : public Error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    CheckpointErrorKind kind() const noexcept { return kind_; }

private:
    CheckpointErrorKind kind_;
};

}  // namespace fpd
