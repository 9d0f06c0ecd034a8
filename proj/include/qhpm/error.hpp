#pragma once

#include <stdexcept>
#include <string>

namespace qhpm {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Validation,      // malformed input, dimension mismatch, out-of-range argument
    Precondition,    // a mathematical precondition of the method does not hold
    Numerical,       // iteration did not converge, divergence, residual target missed
    BoundViolation,  // a proven bound was measured to be violated
    CapExceeded,     // a configured size cap would be exceeded
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) {
        throw Error(kind, what);
    }
}

[[nodiscard]] constexpr const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Precondition: return "precondition";
        case ErrorKind::Numerical: return "numerical";
        case ErrorKind::BoundViolation: return "bound_violation";
        case ErrorKind::CapExceeded: return "cap_exceeded";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace qhpm
