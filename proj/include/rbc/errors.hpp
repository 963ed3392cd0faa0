#pragma once

#include <stdexcept>
#include <string>

namespace rbc {

/// Model structure does not match the data it is applied to.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input data. Carries the 1-based row and the column name when known.
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, long row = -1, std::string column = {})
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}

    long row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    long row_;
    std::string column_;
};

class OptimizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TuningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested diagnostic cannot be computed from the available trace.
class DiagnosticUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rbc
