#pragma once

#include <cmath>
#include <vector>

#include "carleman/errors.hpp"
#include "carleman/grid.hpp"

namespace carleman::grad {

/// Component indices of the per-site state V = (rho, J1, J2, P11, P12, P22).
/// P12 is stored once; tensor symmetry is structural.
inline constexpr int kRho = 0;
inline constexpr int kJ1 = 1;
inline constexpr int kJ2 = 2;
inline constexpr int kP11 = 3;
inline constexpr int kP12 = 4;
inline constexpr int kP22 = 5;
inline constexpr int kComponents = 6;

/// Per-site 6-vector field, laid out site*6 + component.
struct FlowField {
    linalg::Grid grid;
    std::vector<double> data;

    FlowField() = default;
    explicit FlowField(const linalg::Grid& g)
        : grid(g), data(static_cast<size_t>(g.sites()) * kComponents, 0.0) {}

    double& at(int site, int comp) {
        return data[static_cast<size_t>(site) * kComponents + static_cast<size_t>(comp)];
    }
    double at(int site, int comp) const {
        return data[static_cast<size_t>(site) * kComponents + static_cast<size_t>(comp)];
    }
    const double* site(int s) const { return data.data() + static_cast<size_t>(s) * kComponents; }
    double* site(int s) { return data.data() + static_cast<size_t>(s) * kComponents; }
};

struct GradParams {
    double omega = 2.0;               // relaxation rate
    double cs = 1.0 / std::sqrt(3.0);  // speed of sound
    double dt = 0.01;                  // Euler timestep
    /// Use the weakly-compressible polynomial inverse 1/rho ~ 2 - rho in the
    /// equilibrium tensors (matches the Carleman side); false restores the
    /// exact 1/rho.
    bool polynomial_inverse = true;

    double tau() const { return 1.0 / omega; }
    double cs2() const { return cs * cs; }

    void validate() const {
        if (!(omega > 0.0)) throw ConfigError("GradParams: omega must be positive");
        if (!(dt > 0.0)) throw ConfigError("GradParams: dt must be positive");
        if (!(omega * dt < 2.0)) {
            throw ConfigError("GradParams: omega*dt must be < 2 (Euler relaxation stability)");
        }
        if (!(cs > 0.0) || !(cs * dt < 1.0)) {
            throw ConfigError("GradParams: need cs > 0 and cs*dt < 1 (acoustic CFL)");
        }
    }
};

}  // namespace carleman::grad
