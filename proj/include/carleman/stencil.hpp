#pragma once

#include <vector>

#include "carleman/errors.hpp"
#include "carleman/grid.hpp"

namespace carleman::linalg {

struct StencilTap {
    int d1 = 0;
    int d2 = 0;
    double weight = 0.0;
};

/// Discrete derivative (or identity) stencil on the unit lattice.
struct Stencil {
    std::vector<StencilTap> taps;
};

/// Second-order central difference along `axis` (1 or 2):
/// weight +1/2 at +e_axis, -1/2 at -e_axis, nothing at the center.
inline Stencil central_difference(int axis) {
    if (axis != 1 && axis != 2) {
        throw DomainError("central_difference: axis must be 1 or 2");
    }
    Stencil s;
    if (axis == 1) {
        s.taps = {{+1, 0, +0.5}, {-1, 0, -0.5}};
    } else {
        s.taps = {{0, +1, +0.5}, {0, -1, -0.5}};
    }
    return s;
}

inline Stencil identity_stencil() {
    return Stencil{{{0, 0, 1.0}}};
}

/// (S u)(x) = sum_taps w * u(x + d), periodic wrap.
inline Field apply_stencil(const Grid& grid, const Stencil& s, const Field& u) {
    if (static_cast<int>(u.size()) != grid.sites()) {
        throw ShapeError("apply_stencil: field size does not match grid");
    }
    Field out(u.size(), 0.0);
    for (int site = 0; site < grid.sites(); ++site) {
        double acc = 0.0;
        for (const StencilTap& t : s.taps) {
            acc += t.weight * u[grid.shifted(site, t.d1, t.d2)];
        }
        out[site] = acc;
    }
    return out;
}

}  // namespace carleman::linalg
