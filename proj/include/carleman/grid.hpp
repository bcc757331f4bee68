#pragma once

#include <vector>

#include "carleman/errors.hpp"

namespace carleman::linalg {

/// Periodic 2D lattice with unit spacing.
///
/// Sites are ordered row-major in (x1, x2): site = x1 * ny + x2. All index
/// arithmetic wraps periodically in both dimensions. State vectors over the
/// grid are laid out site-major with the component index varying fastest:
/// flat index = site * block_dim + component.
struct Grid {
    int nx = 1;
    int ny = 1;

    Grid() = default;
    Grid(int nx_, int ny_) : nx(nx_), ny(ny_) {
        if (nx < 1 || ny < 1) {
            throw ConfigError("Grid: nx and ny must be positive");
        }
    }

    int sites() const { return nx * ny; }

    static int wrap(int i, int n) {
        i %= n;
        return i < 0 ? i + n : i;
    }

    int site(int x1, int x2) const { return wrap(x1, nx) * ny + wrap(x2, ny); }

    int x1(int s) const { return s / ny; }
    int x2(int s) const { return s % ny; }

    /// Site reached from `s` by the periodic offset (d1, d2).
    int shifted(int s, int d1, int d2) const {
        return wrap(x1(s) + d1, nx) * ny + wrap(x2(s) + d2, ny);
    }

    bool operator==(const Grid&) const = default;
};

/// One scalar per site, indexed by Grid::site.
using Field = std::vector<double>;

}  // namespace carleman::linalg
