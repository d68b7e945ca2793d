#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exwave {

/// Failure categories surfaced by the library. The CLI maps validation
/// failures to exit code 2 and numerical failures to exit code 3.
enum class ErrorKind {
    // geometry / configuration
    NestingViolation,
    DisconnectedAnnulus,
    EmptyPatch,
    ObstacleTouchesQ0,
    UnresolvedSurface,
    ConfigError,
    SupportViolation,
    ConfigMismatch,
    RhoOutOfRange,
    EmptyMask,
    ThresholdViolation,
    MissingTrace,
    InsufficientPatch,
    WindowTooShort,
    // numerical
    CflViolation,
    NumericalBlowup,
    NonPositiveEnergy,
    IllConditioned,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for kinds that indicate a numerical failure rather than bad input.
bool is_numerical(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace exwave
