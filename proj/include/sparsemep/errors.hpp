#pragma once

#include <stdexcept>
#include <string>

namespace sparsemep {

// Process exit codes used by the CLI. Warnings are OR'ed in as a separate bit.
enum class ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataIntegrity = 2,
    kInfeasible = 3,
    kSolverFailure = 4,
};
inline constexpr int kWarningBit = 8;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual ExitCode exit_code() const noexcept { return ExitCode::kSolverFailure; }
};

/// Argument outside the mathematical domain of an operation (q outside [0,1], T <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class ShapeError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double condition = 0.0)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long row, long col)
        : Error(what), row_(row), col_(col) {}
    long row() const noexcept { return row_; }
    long col() const noexcept { return col_; }

private:
    long row_;
    long col_;
};

class ConstraintError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kInfeasible; }
};

class DataIntegrityError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDataIntegrity; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long row = -1, long col = -1)
        : Error(what), row_(row), col_(col) {}
    ExitCode exit_code() const noexcept override { return ExitCode::kDataIntegrity; }
    long row() const noexcept { return row_; }
    long col() const noexcept { return col_; }

private:
    long row_;
    long col_;
};

class VersionError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDataIntegrity; }
};

}  // namespace sparsemep
