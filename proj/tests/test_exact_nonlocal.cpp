#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "carleman/carleman_grad.hpp"
#include "carleman/grad.hpp"

using namespace carleman;
using namespace carleman::grad;
using namespace carleman::lifted;
using carleman::linalg::Grid;
using Catch::Approx;

TEST_CASE("oracle refuses grids beyond the guard", "[lifted][oracle]") {
    GradParams p;
    Grid g(5, 5);  // 25 > 16 sites
    FlowField v0 = kolmogorov_init(g, 0.0, 0.0, p);
    REQUIRE_THROWS_AS(exact_nonlocal_lift(v0, p, 1), ResourceGuardError);
}

TEST_CASE("zeroed stencils give zero deviation for both closures", "[lifted][oracle]") {
    GradParams p;
    Grid g(4, 4);
    CarlemanBuildOptions opts;
    opts.d1.taps.clear();
    opts.d2.taps.clear();
    const auto v0 = kolmogorov_init(g, 0.1, 0.05, p);
    const auto rows = exact_nonlocal_lift(v0, p, 20, opts);
    for (const auto& row : rows) {
        REQUIRE(row.max_diagonal < 1e-14);
        REQUIRE(row.max_leibniz < 1e-14);
    }
}

TEST_CASE("one step from the local manifold: diagonal closure is exact", "[lifted][oracle]") {
    GradParams p;
    Grid g(4, 4);
    const auto v0 = kolmogorov_init(g, 0.1, 0.1, p);
    const auto rows = exact_nonlocal_lift(v0, p, 1);
    REQUIRE(rows.size() == 1);
    // The same-site diagonal of A Z A^T from a block-diagonal Z is exactly the
    // sitewise Kronecker compression. The leibniz closure transports the
    // product field immediately (an O(dt) term), while the pair evolution
    // moves the diagonal only through cross-site pairs, i.e. one step later.
    REQUIRE(rows[0].max_diagonal < 1e-15);
    REQUIRE(rows[0].max_leibniz > 0.0);
    REQUIRE(rows[0].max_leibniz < 2e-3);
}

TEST_CASE("Kolmogorov 4x4, 50 steps: deviation report is sane", "[lifted][oracle]") {
    GradParams p;
    Grid g(4, 4);
    const auto v0 = kolmogorov_init(g, 0.1, 0.1, p);
    const auto rows = exact_nonlocal_lift(v0, p, 50);
    REQUIRE(rows.size() == 50);
    for (const auto& row : rows) {
        REQUIRE(std::isfinite(row.max_diagonal));
        REQUIRE(std::isfinite(row.max_leibniz));
        REQUIRE(row.mean_diagonal <= row.max_diagonal);
        REQUIRE(row.mean_leibniz <= row.max_leibniz);
    }
    INFO("diagonal closure deviation after 50 steps: " << rows.back().max_diagonal);
    INFO("leibniz closure deviation after 50 steps: " << rows.back().max_leibniz);
    REQUIRE(rows.back().max_diagonal > 0.0);
    REQUIRE(rows.back().max_leibniz > 0.0);
    REQUIRE(rows.back().max_diagonal < 0.2);
    REQUIRE(rows.back().max_leibniz < 0.2);
}

TEST_CASE("closure deviation scaling in dt at fixed step count", "[lifted][oracle]") {
    Grid g(4, 4);
    const int steps = 50;
    std::vector<double> dts = {1e-2, 1e-3, 1e-4};
    std::vector<double> dev_diag, dev_leib;
    for (double dt : dts) {
        GradParams p;
        p.dt = dt;
        const auto v0 = kolmogorov_init(g, 0.1, 0.1, p);
        const auto rows = exact_nonlocal_lift(v0, p, steps);
        dev_diag.push_back(rows.back().max_diagonal);
        dev_leib.push_back(rows.back().max_leibniz);
    }
    for (size_t i = 0; i + 1 < dts.size(); ++i) {
        const double slope_d =
            std::log(dev_diag[i] / dev_diag[i + 1]) / std::log(dts[i] / dts[i + 1]);
        const double slope_l =
            std::log(dev_leib[i] / dev_leib[i + 1]) / std::log(dts[i] / dts[i + 1]);
        INFO("pair " << i << ": diagonal slope " << slope_d << ", leibniz slope " << slope_l);
        // Diagonal closure: deviation enters purely through cross-pair
        // feedback, two dt factors per round trip -> slope 2.
        REQUIRE(slope_d == Approx(2.0).margin(0.2));
        // Leibniz closure: its immediate O(dt) product-field transport leads
        // the pair evolution by one step, so the asymptotic slope is 1.
        REQUIRE(slope_l > 0.8);
        REQUIRE(slope_l < 1.6);
    }
}
