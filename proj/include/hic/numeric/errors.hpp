#pragma once

#include <stdexcept>
#include <string>

namespace hic {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

// Non-finite value produced by an operation; carries the operation id.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::string op = {})
        : Error(what), op_(std::move(op)) {}
    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error("config field '" + field + "': " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file content; offset is the byte position where parsing failed.
class FormatError : public IoError {
public:
    FormatError(const std::string& what, std::size_t offset)
        : IoError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace hic
