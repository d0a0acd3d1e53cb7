#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace soundgrid {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Aggregation over a period that holds no data.
class EmptyPeriodError : public Error {
public:
    using Error::Error;
};

class EmptyIntervalError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed audio container; the message names the offending chunk.
class FormatError : public Error {
public:
    FormatError(std::string chunk, const std::string& what)
        : Error("wav chunk '" + chunk + "': " + what), chunk_(std::move(chunk)) {}

    const std::string& chunk() const noexcept { return chunk_; }

private:
    std::string chunk_;
};

/// Malformed text; carries the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed value that violates a range or invariant; names the field.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

} // namespace soundgrid
