#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "carleman/errors.hpp"
#include "carleman/grid.hpp"

namespace carleman::lbm {

inline constexpr int kQ = 9;
// Rest, axis, diagonal velocities of the D2Q9 lattice.
inline constexpr std::array<std::array<int, 2>, kQ> kVelocity = {
    {{0, 0}, {1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
inline constexpr std::array<double, kQ> kWeight = {
    4.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0,
    1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0};
inline constexpr double kCs2 = 1.0 / 3.0;

/// nu = c_s^2 (1/omega - 1/2), the BGK kinematic viscosity at unit timestep.
inline double viscosity(double omega) { return kCs2 * (1.0 / omega - 0.5); }

/// Nine population fields on a periodic grid, laid out site*9 + i.
struct Populations {
    linalg::Grid grid;
    std::vector<double> f;

    Populations() = default;
    explicit Populations(const linalg::Grid& g)
        : grid(g), f(static_cast<size_t>(g.sites()) * kQ, 0.0) {}

    double* site(int s) { return f.data() + static_cast<size_t>(s) * kQ; }
    const double* site(int s) const { return f.data() + static_cast<size_t>(s) * kQ; }
};

struct Moments {
    linalg::Field rho;
    linalg::Field j1;
    linalg::Field j2;
};

inline void equilibrium_site(double rho, double jx, double jy, double* feq) {
    const double jj = jx * jx + jy * jy;
    const double inv_rho = 1.0 / rho;
    for (int i = 0; i < kQ; ++i) {
        const double jc = jx * kVelocity[i][0] + jy * kVelocity[i][1];
        feq[i] = kWeight[i] * (rho + jc / kCs2 + inv_rho * jc * jc / (2.0 * kCs2 * kCs2) -
                               inv_rho * jj / (2.0 * kCs2));
    }
}

/// f_i^eq = w_i (rho + J.c_i/c_s^2 + (J.c_i)^2/(2 rho c_s^4) - J.J/(2 rho c_s^2)).
inline Populations d2q9_equilibrium(const linalg::Grid& grid, const linalg::Field& rho,
                                    const linalg::Field& j1, const linalg::Field& j2) {
    const size_t n = static_cast<size_t>(grid.sites());
    if (rho.size() != n || j1.size() != n || j2.size() != n) {
        throw ShapeError("d2q9_equilibrium: field sizes do not match grid");
    }
    Populations pops(grid);
    for (int s = 0; s < grid.sites(); ++s) {
        if (!(rho[static_cast<size_t>(s)] > 0.0)) {
            throw DomainError("d2q9_equilibrium: density must be positive");
        }
        equilibrium_site(rho[static_cast<size_t>(s)], j1[static_cast<size_t>(s)],
                         j2[static_cast<size_t>(s)], pops.site(s));
    }
    return pops;
}

inline Moments moments(const Populations& pops) {
    Moments m;
    const int n = pops.grid.sites();
    m.rho.assign(static_cast<size_t>(n), 0.0);
    m.j1.assign(static_cast<size_t>(n), 0.0);
    m.j2.assign(static_cast<size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
        const double* f = pops.site(s);
        double rho = 0.0, jx = 0.0, jy = 0.0;
        for (int i = 0; i < kQ; ++i) {
            rho += f[i];
            jx += f[i] * kVelocity[i][0];
            jy += f[i] * kVelocity[i][1];
        }
        m.rho[static_cast<size_t>(s)] = rho;
        m.j1[static_cast<size_t>(s)] = jx;
        m.j2[static_cast<size_t>(s)] = jy;
    }
    return m;
}

/// One BGK step, collide-then-stream with unit timestep:
/// f_i(x + c_i, t+1) = f_i(x, t) - omega (f_i(x, t) - f_i^eq(x, t)).
inline Populations lbm_step(const Populations& pops, double omega) {
    if (omega < 0.0 || omega >= 2.0) {
        throw DomainError("lbm_step: omega must lie in [0, 2)");
    }
    const linalg::Grid& grid = pops.grid;
    Populations out(grid);
    std::array<double, kQ> feq{};
    for (int s = 0; s < grid.sites(); ++s) {
        const double* f = pops.site(s);
        double rho = 0.0, jx = 0.0, jy = 0.0;
        for (int i = 0; i < kQ; ++i) {
            rho += f[i];
            jx += f[i] * kVelocity[i][0];
            jy += f[i] * kVelocity[i][1];
        }
        equilibrium_site(rho, jx, jy, feq.data());
        for (int i = 0; i < kQ; ++i) {
            const double post = f[i] - omega * (f[i] - feq[i]);
            const int dest = grid.shifted(s, kVelocity[i][0], kVelocity[i][1]);
            out.site(dest)[i] = post;
        }
    }
    return out;
}

/// Kolmogorov-flow initial populations: rho = 1, J1 = A1 cos(k x2),
/// J2 = A2 cos(k x1), k = 2 pi / L, at local equilibrium.
inline Populations kolmogorov_populations(const linalg::Grid& grid, double a1, double a2) {
    if (grid.nx != grid.ny) {
        throw ConfigError("kolmogorov_populations: grid must be square (L x L)");
    }
    const double k = 2.0 * M_PI / grid.nx;
    const size_t n = static_cast<size_t>(grid.sites());
    linalg::Field rho(n, 1.0), j1(n), j2(n);
    for (int s = 0; s < grid.sites(); ++s) {
        j1[static_cast<size_t>(s)] = a1 * std::cos(k * grid.x2(s));
        j2[static_cast<size_t>(s)] = a2 * std::cos(k * grid.x1(s));
    }
    return d2q9_equilibrium(grid, rho, j1, j2);
}

}  // namespace carleman::lbm
