#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "carleman/errors.hpp"

namespace carleman::logistic {

/// Parameters of dx/dt = -a x + b x^2, x(0) = x0.
struct LogisticParams {
    double a = 1.0;   // decay rate
    double b = 1.0;   // quadratic rate
    double x0 = 0.5;  // initial condition

    /// R = b/a; the unstable (a>0) or stable (a<0) attractor sits at 1/R.
    double ratio() const {
        if (a == 0.0) throw DomainError("LogisticParams: R = b/a undefined for a = 0");
        return b / a;
    }
};

/// Finite positive time at which the exact solution's denominator vanishes,
/// if any: t* = -(1/a) log(1 - 1/(R x0)).
inline std::optional<double> singular_time(const LogisticParams& p) {
    const double rx0 = p.ratio() * p.x0;
    const double arg = 1.0 - 1.0 / rx0;
    if (arg <= 0.0) return std::nullopt;  // rx0 in (0, 1]: no real crossing
    const double t = -std::log(arg) / p.a;
    if (t > 0.0 && std::isfinite(t)) return t;
    return std::nullopt;
}

/// x(t) = x0 e^{-at} / (1 - R x0 (1 - e^{-at})).
/// Throws BlowupError when evaluated at or beyond the singular time.
inline double exact_solution(const LogisticParams& p, double t) {
    const double rx0 = p.ratio() * p.x0;
    const double e = std::exp(-p.a * t);
    const double denom = 1.0 - rx0 * (1.0 - e);
    if (denom <= 0.0) {
        const auto ts = singular_time(p);
        throw BlowupError(ts.value_or(std::numeric_limits<double>::quiet_NaN()),
                          "exact_solution: evaluated at or beyond the blow-up time");
    }
    return p.x0 * e / denom;
}

/// Finite blow-up time for the decaying-parameter case a > 0, b > 0:
/// t_sing = (1/a) log(R x0 / (R x0 - 1)) when R x0 > 1, none otherwise.
inline std::optional<double> blowup_time(const LogisticParams& p) {
    if (p.a <= 0.0 || p.b <= 0.0) {
        throw DomainError("blowup_time: requires a > 0 and b > 0");
    }
    const double rx0 = p.ratio() * p.x0;
    if (rx0 <= 1.0) return std::nullopt;
    return std::log(rx0 / (rx0 - 1.0)) / p.a;
}

/// Radius of convergence (in time) of the Carleman series around the unstable
/// attractor for the growing case a < 0, b < 0:
/// t_lim = (1/|a|) log((1 + R x0) / (R x0)).
inline double convergence_horizon(const LogisticParams& p) {
    if (p.a >= 0.0 || p.b >= 0.0) {
        throw DomainError("convergence_horizon: requires a < 0 and b < 0");
    }
    const double rx0 = p.ratio() * p.x0;
    if (rx0 <= 0.0) {
        throw DomainError("convergence_horizon: requires R x0 > 0");
    }
    return std::log((1.0 + rx0) / rx0) / std::abs(p.a);
}

/// Magnitude threshold past which partial-sum terms are flagged as divergent.
inline constexpr double kDivergenceThreshold = 1e12;

struct SeriesEval {
    double value = 0.0;
    /// Set once any term magnitude exceeds kDivergenceThreshold; the partial
    /// sum is still returned as-is.
    bool diverged = false;
};

/// Truncated Carleman series
///   x_K(t) = x0 e^{-at} sum_{k=0..K} [R x0 (1 - e^{-at})]^k.
inline SeriesEval carleman_series_eval(const LogisticParams& p, double t, int order) {
    const double q = p.ratio() * p.x0 * (1.0 - std::exp(-p.a * t));
    const double prefactor = p.x0 * std::exp(-p.a * t);
    SeriesEval out;
    double sum = 0.0;
    double qk = 1.0;
    for (int k = 0; k <= order; ++k) {
        const double term = prefactor * qk;
        if (std::abs(term) > kDivergenceThreshold) out.diverged = true;
        sum += qk;
        qk *= q;
    }
    out.value = prefactor * sum;
    return out;
}

inline double carleman_series(const LogisticParams& p, double t, int order) {
    return carleman_series_eval(p, t, order).value;
}

/// Forward-Euler integration of the truncated Carleman hierarchy
///   d x^(k)/dt = -k (a x^(k) - b x^(k+1)),  k = 1..K,  x^(K+1) = 0,
/// from the initial lift (x0, x0^2, ..., x0^K). Returns x^(1) at steps
/// 0..steps (steps+1 values).
inline std::vector<double> carleman_hierarchy(const LogisticParams& p, double dt, long steps,
                                              int order) {
    if (order < 1) throw DomainError("carleman_hierarchy: order must be >= 1");
    if (dt <= 0.0) throw DomainError("carleman_hierarchy: dt must be positive");
    std::vector<double> x(static_cast<size_t>(order));
    double xk = 1.0;
    for (int k = 0; k < order; ++k) {
        xk *= p.x0;
        x[static_cast<size_t>(k)] = xk;
    }
    std::vector<double> series;
    series.reserve(static_cast<size_t>(steps) + 1);
    series.push_back(x[0]);
    std::vector<double> next(x.size());
    for (long n = 0; n < steps; ++n) {
        for (int k = 1; k <= order; ++k) {
            const double higher = (k < order) ? x[static_cast<size_t>(k)] : 0.0;
            next[static_cast<size_t>(k - 1)] =
                x[static_cast<size_t>(k - 1)] -
                dt * k * (p.a * x[static_cast<size_t>(k - 1)] - p.b * higher);
        }
        x.swap(next);
        series.push_back(x[0]);
    }
    return series;
}

}  // namespace carleman::logistic
