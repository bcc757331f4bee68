#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "carleman/carleman_grad.hpp"
#include "carleman/grad.hpp"
#include "test_helpers.hpp"

using namespace carleman;
using namespace carleman::grad;
using namespace carleman::lifted;
using carleman::linalg::Grid;
using Catch::Approx;

namespace {

FlowField random_flow(const Grid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> drho(0.95, 1.05), dj(-0.1, 0.1), dp(0.25, 0.45);
    FlowField f(g);
    for (int s = 0; s < g.sites(); ++s) {
        double* v = f.site(s);
        v[kRho] = drho(rng);
        v[kJ1] = dj(rng);
        v[kJ2] = dj(rng);
        v[kP11] = dp(rng);
        v[kP12] = dj(rng);
        v[kP22] = dp(rng);
    }
    return f;
}

// DNS step with the quadratic/cubic terms suppressed (P_eq -> cs^2 rho delta).
FlowField linearized_step(const FlowField& in, const GradParams& p) {
    const Grid& g = in.grid;
    FlowField out(g);
    const double dt = p.dt, omega = p.omega, c2 = p.cs2(), c2_3 = 3.0 * p.cs2();
    for (int s = 0; s < g.sites(); ++s) {
        const double* v = in.site(s);
        const double* e1p = in.site(g.shifted(s, +1, 0));
        const double* e1m = in.site(g.shifted(s, -1, 0));
        const double* e2p = in.site(g.shifted(s, 0, +1));
        const double* e2m = in.site(g.shifted(s, 0, -1));
        const auto d1 = [&](int c) { return 0.5 * (e1p[c] - e1m[c]); };
        const auto d2 = [&](int c) { return 0.5 * (e2p[c] - e2m[c]); };
        double* o = out.site(s);
        o[kRho] = v[kRho] - dt * (d1(kJ1) + d2(kJ2));
        o[kJ1] = v[kJ1] - dt * (d1(kP11) + d2(kP12));
        o[kJ2] = v[kJ2] - dt * (d1(kP12) + d2(kP22));
        o[kP11] = v[kP11] - dt * (c2_3 * d1(kJ1) + c2 * d2(kJ2)) -
                  dt * omega * (v[kP11] - c2 * v[kRho]);
        o[kP12] = v[kP12] - dt * (c2 * d1(kJ2) + c2 * d2(kJ1)) - dt * omega * v[kP12];
        o[kP22] = v[kP22] - dt * (c2 * d1(kJ1) + c2_3 * d2(kJ2)) -
                  dt * omega * (v[kP22] - c2 * v[kRho]);
    }
    return out;
}

CarlemanBuildOptions zero_stencils() {
    CarlemanBuildOptions opts;
    opts.d1.taps.clear();
    opts.d2.taps.clear();
    return opts;
}

double block_linf(std::span<const double> blk) {
    double worst = 0.0;
    for (double v : blk) worst = std::max(worst, std::abs(v));
    return worst;
}

}  // namespace

TEST_CASE("lifting a uniform state gives uniform tensor powers", "[lifted]") {
    GradParams p;
    Grid g(4, 4);
    const auto v0 = kolmogorov_init(g, 0.0, 0.0, p);
    const auto s = lift_initial_state(v0, 3);
    const auto w2 = s.block(2);
    const double* v = v0.site(0);
    for (int site = 0; site < g.sites(); ++site) {
        for (int a = 0; a < 6; ++a) {
            for (int b = 0; b < 6; ++b) {
                REQUIRE(w2[static_cast<size_t>(36 * site + 6 * a + b)] == v[a] * v[b]);
            }
        }
    }
}

TEST_CASE("second-order lift is symmetric under slot swap", "[lifted]") {
    Grid g(3, 3);
    const auto v0 = random_flow(g, 5);
    const auto s = lift_initial_state(v0, 2);
    const auto w2 = s.block(2);
    for (int site = 0; site < g.sites(); ++site) {
        for (int a = 0; a < 6; ++a) {
            for (int b = 0; b < 6; ++b) {
                REQUIRE(w2[static_cast<size_t>(36 * site + 6 * a + b)] ==
                        w2[static_cast<size_t>(36 * site + 6 * b + a)]);
            }
        }
    }
}

TEST_CASE("Kolmogorov lift squares the shear amplitude", "[lifted]") {
    GradParams p;
    Grid g(32, 32);
    const auto v0 = kolmogorov_init(g, 0.1, 0.0, p);
    const auto s = lift_initial_state(v0, 2);
    const int origin = g.site(0, 0);
    REQUIRE(s.block(2)[static_cast<size_t>(36 * origin + 6 * kJ1 + kJ1)] ==
            Approx(0.01).margin(1e-15));
}

TEST_CASE("truncation-order guards", "[lifted]") {
    GradParams p;
    Grid g(2, 2);
    REQUIRE_THROWS_AS(build_carleman_operator(p, g, 0, Closure::diagonal), DomainError);
    REQUIRE_THROWS_AS(build_carleman_operator(p, g, 6, Closure::diagonal), ResourceGuardError);
    CarlemanBuildOptions opts;
    opts.max_order = 2;
    REQUIRE_THROWS_AS(build_carleman_operator(p, g, 3, Closure::diagonal, opts),
                      ResourceGuardError);
}

TEST_CASE("block bandwidth in the order index is two", "[lifted]") {
    GradParams p;
    Grid g(2, 2);
    const auto op = build_carleman_operator(p, g, 4, Closure::diagonal);
    for (int j = 1; j <= 4; ++j) {
        REQUIRE(op.block(j, 0) != nullptr);
        REQUIRE((op.block(j, 1) != nullptr) == (j + 1 <= 4));
        REQUIRE((op.block(j, 2) != nullptr) == (j + 2 <= 4));
    }
    REQUIRE(op.block(4, 1) == nullptr);
    REQUIRE(op.block(3, 2) == nullptr);
}

TEST_CASE("K = 1 run is the repeated first-order operator, bitwise", "[lifted]") {
    GradParams p;
    Grid g(8, 8);
    const auto v0 = kolmogorov_init(g, 0.1, 0.1, p);
    const auto op = build_carleman_operator(p, g, 1, Closure::diagonal);
    auto series = carleman_run_series(op, lift_initial_state(v0, 1), 20);

    const auto m = build_local_matrices(p);
    const auto a_hat = first_order_operator(m, g);
    std::vector<double> v = v0.data;
    for (int n = 1; n <= 20; ++n) {
        v = a_hat.apply(v);
        REQUIRE(test::linf_diff(v, series[static_cast<size_t>(n)].data) == 0.0);
    }
}

TEST_CASE("first-order step equals the DNS with nonlinear terms suppressed", "[lifted]") {
    GradParams p;
    Grid g(8, 8);
    const auto v0 = random_flow(g, 31);
    const auto op = build_carleman_operator(p, g, 1, Closure::diagonal);
    const auto one = carleman_run_series(op, lift_initial_state(v0, 1), 1)[1];
    const auto expect = linearized_step(v0, p);
    REQUIRE(test::linf_diff(one.data, expect.data) < 1e-15);
}

TEST_CASE("the first-order operator fixes the uniform global equilibrium", "[lifted]") {
    GradParams p;
    Grid g(6, 6);
    const auto v0 = kolmogorov_init(g, 0.0, 0.0, p);
    const auto m = build_local_matrices(p);
    const auto a_hat = first_order_operator(m, g);
    const auto out = a_hat.apply(v0.data);
    REQUIRE(test::linf_diff(out, v0.data) == 0.0);
}

TEST_CASE("uniform equilibrium is an exact fixed point under the leibniz closure", "[lifted]") {
    GradParams p;
    Grid g(8, 8);
    const auto v0 = kolmogorov_init(g, 0.0, 0.0, p);
    for (int order = 1; order <= 4; ++order) {
        const auto op = build_carleman_operator(p, g, order, Closure::leibniz);
        auto s = lift_initial_state(v0, order);
        LiftedState out(g, order);
        op.apply(s, out);
        // omega dt cs^2 + (1 - omega dt) cs^2 rounds to cs^2 within an ulp,
        // so the fixed point holds to round-off rather than bitwise.
        REQUIRE(test::linf_diff(out.data, s.data) < 1e-15);
    }
}

TEST_CASE("diagonal-closure equilibrium defect is O(dt^2) and confined", "[lifted]") {
    // kron_compress squares the stencil weights, so the +-e offsets no longer
    // cancel on uniform fields; the per-step defect in the lifted blocks is
    // O((dt cs^2)^2) while the order-1 block stays exact for one step.
    GradParams p;
    Grid g(8, 8);
    const auto v0 = kolmogorov_init(g, 0.0, 0.0, p);
    const auto op = build_carleman_operator(p, g, 2, Closure::diagonal);
    auto s = lift_initial_state(v0, 2);
    LiftedState out(g, 2);
    op.apply(s, out);
    std::vector<double> diff(out.data.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = out.data[i] - s.data[i];
    const double dev1 = block_linf({diff.data(), static_cast<size_t>(s.block_size(1))});
    const double dev2 = block_linf(
        {diff.data() + s.block_offset(2), static_cast<size_t>(s.block_size(2))});
    REQUIRE(dev1 == 0.0);
    REQUIRE(dev2 > 0.0);
    const double bound = 0.5 * (p.dt * p.cs2()) * (p.dt * p.cs2()) * 1.01;
    REQUIRE(dev2 <= bound);
}

TEST_CASE("collision-only closures match the exact nonlocal lift", "[lifted]") {
    GradParams p;
    Grid g(3, 3);
    const auto opts = zero_stencils();
    const auto v0 = random_flow(g, 77);
    for (auto closure : {Closure::diagonal, Closure::leibniz}) {
        const auto op = build_carleman_operator(p, g, 2, closure, opts);
        auto s = lift_initial_state(v0, 2);
        // Exact nonlocal: Z <- A Z A^T with block-diagonal A (no transport).
        const auto rows = exact_nonlocal_lift(v0, p, 10, opts);
        for (const auto& row : rows) {
            const double dev =
                closure == Closure::diagonal ? row.max_diagonal : row.max_leibniz;
            REQUIRE(dev < 1e-14);
        }
    }
}

TEST_CASE("lifted block rows respect the 6^j x stencil-support sparsity bound", "[lifted]") {
    GradParams p;
    Grid g(4, 4);
    for (auto closure : {Closure::diagonal, Closure::leibniz}) {
        const auto op = build_carleman_operator(p, g, 3, closure);
        for (int j = 1; j <= 3; ++j) {
            const int bound = static_cast<int>(order_dim(j)) * 5;
            const int measured = op.block(j, 0)->max_row_nnz();
            INFO(closure_name(closure) << " j=" << j << " max row nnz " << measured);
            REQUIRE(measured <= bound);
        }
    }
}

TEST_CASE("orders stay decoupled from below: zeroed higher blocks never refill", "[lifted]") {
    GradParams p;
    Grid g(4, 4);
    const auto v0 = kolmogorov_init(g, 0.1, 0.1, p);
    const auto op3 = build_carleman_operator(p, g, 3, Closure::diagonal);
    const auto op1 = build_carleman_operator(p, g, 1, Closure::diagonal);

    LiftedState s3(g, 3);
    const auto s1 = lift_initial_state(v0, 1);
    std::copy(s1.data.begin(), s1.data.end(), s3.block(1).begin());

    auto run3 = carleman_run_series(op3, s3, 15);
    auto run1 = carleman_run_series(op1, s1, 15);
    for (size_t n = 0; n < run1.size(); ++n) {
        REQUIRE(test::linf_diff(run3[n].data, run1[n].data) == 0.0);
    }
}

TEST_CASE("linear regime: quadratic feeds are negligible at any order", "[lifted][slow]") {
    GradParams p;
    Grid g(32, 32);
    const auto v0 = kolmogorov_init(g, 0.1, 0.0, p);
    const auto op1 = build_carleman_operator(p, g, 1, Closure::diagonal);
    const auto op2 = build_carleman_operator(p, g, 2, Closure::diagonal);
    auto run1 = carleman_run_series(op1, lift_initial_state(v0, 1), 100);
    auto run2 = carleman_run_series(op2, lift_initial_state(v0, 2), 100);
    double worst = 0.0;
    for (size_t n = 0; n < run1.size(); ++n) {
        for (int s = 0; s < g.sites(); ++s) {
            for (int comp : {kJ1, kJ2}) {
                const double ref = run1[n].at(s, comp);
                const double diff = std::abs(run2[n].at(s, comp) - ref);
                if (std::abs(ref) > 1e-6) worst = std::max(worst, diff / std::abs(ref));
            }
        }
    }
    REQUIRE(worst < 1e-4);
}

TEST_CASE("slot symmetry is preserved by both closures", "[lifted]") {
    GradParams p;
    Grid g(3, 3);
    const auto v0 = random_flow(g, 91);
    for (auto closure : {Closure::leibniz, Closure::diagonal}) {
        const auto op = build_carleman_operator(p, g, 3, closure);
        auto s = lift_initial_state(v0, 3);
        s = carleman_run(op, s, 5);
        const auto w2 = s.block(2);
        const auto w3 = s.block(3);
        const double scale2 = block_linf(w2);
        const double scale3 = block_linf(w3);
        for (int site = 0; site < g.sites(); ++site) {
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    const double ab = w2[static_cast<size_t>(36 * site + 6 * a + b)];
                    const double ba = w2[static_cast<size_t>(36 * site + 6 * b + a)];
                    REQUIRE(std::abs(ab - ba) <= 1e-14 * scale2);
                    for (int c = 0; c < 6; ++c) {
                        const double abc =
                            w3[static_cast<size_t>(216 * site + 36 * a + 6 * b + c)];
                        const double acb =
                            w3[static_cast<size_t>(216 * site + 36 * a + 6 * c + b)];
                        const double bac =
                            w3[static_cast<size_t>(216 * site + 36 * b + 6 * a + c)];
                        REQUIRE(std::abs(abc - acb) <= 1e-14 * scale3);
                        REQUIRE(std::abs(abc - bac) <= 1e-14 * scale3);
                    }
                }
            }
        }
    }
}

TEST_CASE("carleman_run reports instability with the step index", "[lifted]") {
    GradParams p;
    p.dt = 0.9;
    Grid g(4, 4);
    const auto v0 = kolmogorov_init(g, 0.9, 0.9, p);
    const auto op = build_carleman_operator(p, g, 2, Closure::diagonal);
    try {
        carleman_run(op, lift_initial_state(v0, 2), 20000);
        FAIL("expected InstabilityError");
    } catch (const InstabilityError& e) {
        REQUIRE(e.step >= 1);
    }
}
