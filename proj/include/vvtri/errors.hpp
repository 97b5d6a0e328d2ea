#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vv {

enum class ErrorKind {
    OutOfNeighborhood,
    DegenerateSpectrum,
    NonpositiveTime,
    TruncationOverflow,
    CharacteristicDrift,
    QuadratureFailure,
    Diverged,
    StabilityViolation,
    NoContraction,
    NoConvergence,
    CutoffDominates,
    NoSolution,
    TraceUndefined,
    ConfigError,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace vv
