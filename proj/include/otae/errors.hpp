#pragma once

#include <stdexcept>
#include <string>

namespace otae {

// Exit codes used by the command-line tool. Every library error maps onto one.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual ExitCode exit_code() const noexcept = 0;
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

class ShapeError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

// Support size over the exact solver's cap; the caller should subsample.
class CapacityError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// All subject distances are zero, so the distance normalization is undefined.
class DegenerateDistanceError : public NumericError {
public:
    using NumericError::NumericError;
};

// Literal regularizer normalization produced a negative group weight.
class NormalizationError : public ConfigError {
public:
    NormalizationError(const std::string& what, double lambda_group)
        : ConfigError(what), lambda_group_(lambda_group) {}
    double lambda_group() const noexcept { return lambda_group_; }

private:
    double lambda_group_;
};

class InternalError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::numeric; }
};

}  // namespace otae
