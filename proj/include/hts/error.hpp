#pragma once

#include <stdexcept>
#include <string>

namespace hts {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    input = 2,     // unreadable or malformed user input
    contract = 3,  // precondition or invariant violated
    numeric = 4,   // non-finite values, singular systems
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

inline const char* kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::input: return "input";
        case ErrorKind::contract: return "contract";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace hts
