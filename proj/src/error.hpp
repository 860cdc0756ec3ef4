#pragma once

#include <stdexcept>
#include <string>

namespace msj {

// Two error classes drive the process exit codes: validation failures
// (bad configs, malformed inputs, violated preconditions) exit with 1,
// runtime failures (I/O, numerical aborts) with 2.
class Error : public std::runtime_error {
public:
    enum class Kind { Validation, Runtime };

    Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::string msg) : Error(Kind::Validation, std::move(msg)) {}
};

class RuntimeError : public Error {
public:
    explicit RuntimeError(std::string msg) : Error(Kind::Runtime, std::move(msg)) {}
};

// Expression syntax error; carries the byte offset into the source text.
class ParseError : public ValidationError {
public:
    ParseError(std::string msg, std::size_t offset)
        : ValidationError(std::move(msg)), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace msj
