#pragma once

#include <stdexcept>
#include <string>

namespace carleman {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mismatched vector/operator dimensions.
struct ShapeError : Error {
    using Error::Error;
};

/// Inputs outside an operation's mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

/// Invalid configuration (bad grid shape, inconsistent parameters, bad keys).
struct ConfigError : Error {
    using Error::Error;
};

/// Evaluation at or beyond a finite-time singularity.
struct BlowupError : Error {
    double singular_time;
    BlowupError(double t_sing, const std::string& what)
        : Error(what), singular_time(t_sing) {}
};

/// NaN/overflow detected during time marching; `step` is the first bad step.
struct InstabilityError : Error {
    long step;
    InstabilityError(long step_index, const std::string& what)
        : Error(what), step(step_index) {}
};

/// Operator numerically singular (sigma_min below 1e-14 * sigma_max).
struct SingularOperatorError : Error {
    using Error::Error;
};

/// Requested size exceeds a memory or dimension guard.
struct ResourceGuardError : Error {
    using Error::Error;
};

}  // namespace carleman
