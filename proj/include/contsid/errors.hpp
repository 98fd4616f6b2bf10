#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace contsid {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CycleError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class OverlapError : public Error {
public:
    using Error::Error;
};

class SizeMismatchError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ArityError : public Error {
public:
    using Error::Error;
};

class ColumnMismatchError : public Error {
public:
    using Error::Error;
};

class FactorizationError : public Error {
public:
    using Error::Error;
};

class NonGaussianError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A column with zero spread; `column()` is the offending column index when known.
class DegenerateColumnError : public Error {
public:
    static constexpr std::size_t kUnknownColumn = static_cast<std::size_t>(-1);

    explicit DegenerateColumnError(const std::string &what, std::size_t column = kUnknownColumn)
        : Error(what), column_(column) {}

    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t line = 0, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string &what, std::size_t line, std::size_t column) {
        if (line == 0) { return what; }
        std::string out = "line " + std::to_string(line);
        if (column != 0) { out += ", column " + std::to_string(column); }
        return out + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace contsid
