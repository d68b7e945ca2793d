#include "exwave/error.hpp"

namespace exwave {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::NestingViolation: return "NestingViolation";
    case ErrorKind::DisconnectedAnnulus: return "DisconnectedAnnulus";
    case ErrorKind::EmptyPatch: return "EmptyPatch";
    case ErrorKind::ObstacleTouchesQ0: return "ObstacleTouchesQ0";
    case ErrorKind::UnresolvedSurface: return "UnresolvedSurface";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::SupportViolation: return "SupportViolation";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::RhoOutOfRange: return "RhoOutOfRange";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::ThresholdViolation: return "ThresholdViolation";
    case ErrorKind::MissingTrace: return "MissingTrace";
    case ErrorKind::InsufficientPatch: return "InsufficientPatch";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::NonPositiveEnergy: return "NonPositiveEnergy";
    case ErrorKind::IllConditioned: return "IllConditioned";
    }
    return "Unknown";
}

bool is_numerical(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::CflViolation:
    case ErrorKind::NumericalBlowup:
    case ErrorKind::NonPositiveEnergy:
    case ErrorKind::IllConditioned:
        return true;
    default:
        return false;
    }
}

}  // namespace exwave
