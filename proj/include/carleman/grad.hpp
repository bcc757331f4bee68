#pragma once

#include <cmath>
#include <functional>

#include "carleman/errors.hpp"
#include "carleman/flow_field.hpp"
#include "carleman/grid.hpp"

namespace carleman::grad {

struct EquilibriumTensors {
    // P_ab^eq = J_a J_b * inv(rho) + cs^2 rho delta_ab
    double p11 = 0.0, p12 = 0.0, p22 = 0.0;
    // Distinct components of Q_abc^eq = cs^2 (J_a d_bc + J_b d_ac + J_c d_ab);
    // the flux divergences D_c Q_abc are built from these four values.
    double q111 = 0.0, q112 = 0.0, q122 = 0.0, q222 = 0.0;
};

inline EquilibriumTensors equilibrium_tensors(const double* v, double cs, bool polynomial) {
    const double rho = v[kRho];
    const double j1 = v[kJ1];
    const double j2 = v[kJ2];
    double inv;
    if (polynomial) {
        inv = 2.0 - rho;
    } else {
        if (!(rho > 0.0)) {
            throw DomainError("equilibrium_tensors: rho must be positive for the exact inverse");
        }
        inv = 1.0 / rho;
    }
    const double c2 = cs * cs;
    EquilibriumTensors t;
    t.p11 = j1 * j1 * inv + c2 * rho;
    t.p12 = j1 * j2 * inv;
    t.p22 = j2 * j2 * inv + c2 * rho;
    t.q111 = 3.0 * c2 * j1;
    t.q112 = c2 * j2;
    t.q122 = c2 * j1;
    t.q222 = 3.0 * c2 * j2;
    return t;
}

/// Kolmogorov-flow initial condition on an L x L grid: rho = 1,
/// J1 = A1 cos(k x2), J2 = A2 cos(k x1), k = 2 pi / L, P at equilibrium.
inline FlowField kolmogorov_init(const linalg::Grid& grid, double a1, double a2,
                                 const GradParams& params) {
    if (grid.nx != grid.ny) {
        throw ConfigError("kolmogorov_init: grid must be square (L x L)");
    }
    params.validate();
    const double k = 2.0 * M_PI / grid.nx;
    FlowField field(grid);
    for (int s = 0; s < grid.sites(); ++s) {
        double* v = field.site(s);
        v[kRho] = 1.0;
        v[kJ1] = a1 * std::cos(k * grid.x2(s));
        v[kJ2] = a2 * std::cos(k * grid.x1(s));
        const EquilibriumTensors t = equilibrium_tensors(v, params.cs, params.polynomial_inverse);
        v[kP11] = t.p11;
        v[kP12] = t.p12;
        v[kP22] = t.p22;
    }
    return field;
}

/// One forward-Euler step of the 10-moment Grad system (2D, six components):
///   rho' = rho - dt (D1 J1 + D2 J2)
///   Ja'  = Ja  - dt D_b P_ab
///   Pab' = Pab - dt D_c Q_abc^eq - dt omega (Pab - Pab^eq)
/// with second-order central differences and periodic wrap. Throws
/// InstabilityError on NaN/overflow; `step_index` only labels the message.
inline FlowField grad_step(const FlowField& in, const GradParams& params, long step_index = -1) {
    const linalg::Grid& grid = in.grid;
    FlowField out(grid);
    const double dt = params.dt;
    const double omega = params.omega;
    const double c2 = params.cs * params.cs;
    const double c2_3 = 3.0 * c2;
    bool ok = true;
    for (int s = 0; s < grid.sites(); ++s) {
        const double* v = in.site(s);
        const double* e1p = in.site(grid.shifted(s, +1, 0));
        const double* e1m = in.site(grid.shifted(s, -1, 0));
        const double* e2p = in.site(grid.shifted(s, 0, +1));
        const double* e2m = in.site(grid.shifted(s, 0, -1));
        const auto d1 = [&](int c) { return 0.5 * (e1p[c] - e1m[c]); };
        const auto d2 = [&](int c) { return 0.5 * (e2p[c] - e2m[c]); };

        const EquilibriumTensors t = equilibrium_tensors(v, params.cs, params.polynomial_inverse);

        double* o = out.site(s);
        o[kRho] = v[kRho] - dt * (d1(kJ1) + d2(kJ2));
        o[kJ1] = v[kJ1] - dt * (d1(kP11) + d2(kP12));
        o[kJ2] = v[kJ2] - dt * (d1(kP12) + d2(kP22));
        o[kP11] = v[kP11] - dt * (c2_3 * d1(kJ1) + c2 * d2(kJ2)) - dt * omega * (v[kP11] - t.p11);
        o[kP12] = v[kP12] - dt * (c2 * d1(kJ2) + c2 * d2(kJ1)) - dt * omega * (v[kP12] - t.p12);
        o[kP22] = v[kP22] - dt * (c2 * d1(kJ1) + c2_3 * d2(kJ2)) - dt * omega * (v[kP22] - t.p22);

        for (int c = 0; c < kComponents; ++c) {
            ok = ok && std::isfinite(o[c]) && std::abs(o[c]) < 1e12;
        }
    }
    if (!ok) {
        throw InstabilityError(step_index, "grad_step: NaN/overflow in updated state");
    }
    return out;
}

/// Marches `steps` Euler steps, invoking `on_step(step, state)` after each
/// (step counts from 1). Returns the final state.
inline FlowField grad_run(FlowField state, const GradParams& params, long steps,
                          const std::function<void(long, const FlowField&)>& on_step = {}) {
    params.validate();
    for (long n = 1; n <= steps; ++n) {
        state = grad_step(state, params, n);
        if (on_step) on_step(n, state);
    }
    return state;
}

struct PressureEstimate {
    linalg::Field p11, p12, p22;
};

/// Adiabatic (Chapman-Enskog) closure estimate P_ab ~ P_ab^eq - tau D_c Q_abc^eq.
/// Diagnostic for the distance of a state from the Navier-Stokes manifold.
inline PressureEstimate chapman_enskog_pressure(const FlowField& in, const GradParams& params) {
    const linalg::Grid& grid = in.grid;
    const size_t n = static_cast<size_t>(grid.sites());
    PressureEstimate est{linalg::Field(n), linalg::Field(n), linalg::Field(n)};
    const double tau = params.tau();
    const double c2 = params.cs * params.cs;
    const double c2_3 = 3.0 * c2;
    for (int s = 0; s < grid.sites(); ++s) {
        const double* v = in.site(s);
        const double* e1p = in.site(grid.shifted(s, +1, 0));
        const double* e1m = in.site(grid.shifted(s, -1, 0));
        const double* e2p = in.site(grid.shifted(s, 0, +1));
        const double* e2m = in.site(grid.shifted(s, 0, -1));
        const auto d1 = [&](int c) { return 0.5 * (e1p[c] - e1m[c]); };
        const auto d2 = [&](int c) { return 0.5 * (e2p[c] - e2m[c]); };
        const EquilibriumTensors t = equilibrium_tensors(v, params.cs, params.polynomial_inverse);
        est.p11[static_cast<size_t>(s)] = t.p11 - tau * (c2_3 * d1(kJ1) + c2 * d2(kJ2));
        est.p12[static_cast<size_t>(s)] = t.p12 - tau * (c2 * d1(kJ2) + c2 * d2(kJ1));
        est.p22[static_cast<size_t>(s)] = t.p22 - tau * (c2 * d1(kJ1) + c2_3 * d2(kJ2));
    }
    return est;
}

}  // namespace carleman::grad
