#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace norminorm {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An exponent parameter (p or q) outside the supported range, or an
/// operation invoked with exponents it is not defined for.
class InvalidExponent : public Error {
public:
    using Error::Error;
};

/// Input values contain NaN or infinity.
class NonFiniteInput : public Error {
public:
    using Error::Error;
};

/// A batch whose centered norm (or variance) is too small to normalize.
class DegenerateBatch : public Error {
public:
    using Error::Error;
};

/// Two sequences that must have equal length do not.
class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// A batch with fewer entries than the operation requires.
class InvalidBatchSize : public Error {
public:
    using Error::Error;
};

/// Feature/parameter dimensions that do not line up.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A configuration struct with out-of-range or inconsistent fields.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable path, ...).
class IoError : public Error {
public:
    using Error::Error;
};

/// A CSV file whose header or column layout does not match the expected schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A CSV cell that cannot be parsed; carries the offending row and column.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : Error(what + " (row " + std::to_string(row) + ", column " + column + ")"),
          row_(row),
          column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_ = 0;
    std::string column_;
};

}  // namespace norminorm
