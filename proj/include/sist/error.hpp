#pragma once

#include <stdexcept>
#include <string>

namespace sist {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    usage = 1,
    data = 2,
    backend = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

// Invalid input data: malformed files, violated invariants, bad arguments to pure ops.
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

// Transport failure talking to an external backend (after retries).
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message) : Error(ErrorKind::backend, message) {}
};

// The backend answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& message, std::string raw_body = {})
        : Error(ErrorKind::backend, message), raw_body_(std::move(raw_body)) {}

    const std::string& raw_body() const noexcept { return raw_body_; }

private:
    std::string raw_body_;
};

const char* error_kind_name(ErrorKind kind) noexcept;

}  // namespace sist
