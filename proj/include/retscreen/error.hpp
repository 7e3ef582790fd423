#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retscreen {

enum class ErrorKind {
    Precondition,
    Unfittable,
    NonConvergence,
    Unsupported,
    Transport,
    Unavailable,
    NotFound,
    Conflict,
    Ordering,
    Config,
    UndefinedRate,
    Parse,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library. The kind lets callers (HTTP layer,
/// CLI) map failures to status codes without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(ErrorKind::Precondition, message);
    }
}

}  // namespace retscreen
