#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icat {

/// Base class for every error the engine raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration; detected before any backend call.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file or model output. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line = 0, std::string raw = {})
        : Error(line == 0 ? message : message + " (line " + std::to_string(line) + ")"),
          line_(line), raw_(std::move(raw)) {}

    std::size_t line() const noexcept { return line_; }
    /// The offending text, when the error came from a model completion.
    const std::string& raw() const noexcept { return raw_; }

private:
    std::size_t line_;
    std::string raw_;
};

/// Failure talking to a model or search backend.
/// Transient errors (5xx, 429, connection loss) are retried by the gateway.
class BackendError : public Error {
public:
    BackendError(const std::string& message, bool transient, int status = 0)
        : Error(message), transient_(transient), status_(status) {}

    bool transient() const noexcept { return transient_; }
    int status() const noexcept { return status_; }

private:
    bool transient_;
    int status_;
};

}  // namespace icat
