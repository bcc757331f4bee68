#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "carleman/carleman_grad.hpp"
#include "carleman/condition.hpp"
#include "carleman/errors.hpp"
#include "carleman/flow_field.hpp"
#include "carleman/grid.hpp"

namespace carleman::analysis {

/// How sites/components are excluded from the relative-error sum.
enum class MaskPolicy {
    /// Skip component a wherever the reference current J_a was exactly zero at
    /// t = 0 (the paper's white bands).
    reference_t0_zero,
    /// Skip component a wherever |J_a^ref(x, t)| falls below a threshold.
    pointwise_threshold,
};

struct ErrorOptions {
    MaskPolicy policy = MaskPolicy::reference_t0_zero;
    double threshold = 1e-12;
};

/// Per-site relative error of the currents,
///   eps(x) = sum_{a=1,2} |(J_a^ref - J_a^approx) / J_a^ref|,
/// with masked components skipped. A site is masked when both components are.
struct ErrorReport {
    linalg::Grid grid;
    std::vector<double> site_error;
    std::vector<uint8_t> masked;
    double mean = 0.0;
    double time = 0.0;
    int included_sites = 0;
};

inline ErrorReport relative_error(const grad::FlowField& reference, const grad::FlowField& approx,
                                  const grad::FlowField& reference_t0, double time,
                                  const ErrorOptions& opt = {}) {
    if (!(reference.grid == approx.grid) || !(reference.grid == reference_t0.grid)) {
        throw ShapeError("relative_error: grids do not match");
    }
    const linalg::Grid& grid = reference.grid;
    ErrorReport rep;
    rep.grid = grid;
    rep.time = time;
    rep.site_error.assign(static_cast<size_t>(grid.sites()), 0.0);
    rep.masked.assign(static_cast<size_t>(grid.sites()), 0);
    double total = 0.0;
    for (int s = 0; s < grid.sites(); ++s) {
        double err = 0.0;
        int used = 0;
        for (int comp : {grad::kJ1, grad::kJ2}) {
            const double ref = reference.at(s, comp);
            bool skip;
            if (opt.policy == MaskPolicy::reference_t0_zero) {
                skip = (reference_t0.at(s, comp) == 0.0);
            } else {
                skip = (std::abs(ref) < opt.threshold);
            }
            if (skip) continue;
            err += std::abs((ref - approx.at(s, comp)) / ref);
            ++used;
        }
        if (used == 0) {
            rep.masked[static_cast<size_t>(s)] = 1;
        } else {
            rep.site_error[static_cast<size_t>(s)] = err;
            total += err;
            ++rep.included_sites;
        }
    }
    if (rep.included_sites == 0) {
        throw DomainError("relative_error: every site is masked");
    }
    rep.mean = total / rep.included_sites;
    return rep;
}

/// Mean relative error per step for two state series sampled at the same
/// times. The mask is taken from reference[0].
inline std::vector<double> mean_error_series(const std::vector<grad::FlowField>& reference,
                                             const std::vector<grad::FlowField>& approx,
                                             double dt, const ErrorOptions& opt = {}) {
    if (reference.size() != approx.size()) {
        throw ShapeError("mean_error_series: series lengths differ");
    }
    std::vector<double> out;
    out.reserve(reference.size());
    for (size_t i = 0; i < reference.size(); ++i) {
        out.push_back(
            relative_error(reference[i], approx[i], reference[0], dt * static_cast<double>(i), opt)
                .mean);
    }
    return out;
}

struct VariableCount {
    std::uint64_t variables = 0;
    int qubits = 0;
};

/// Number of local Carleman variables for b velocities truncated at order k:
///   N(b, k) = sum_{j=1..k} C(b+j-1, j)   (multisets of size j from b symbols),
/// and the qubit count ceil(log2 N).
inline VariableCount carleman_variable_count(int b, int k) {
    if (b < 1 || k < 1) throw DomainError("carleman_variable_count: need b >= 1 and k >= 1");
    std::uint64_t total = 0;
    std::uint64_t level = 1;  // C(b-1+j, j), starts at j = 0 with value 1
    for (int j = 1; j <= k; ++j) {
        // level *= (b + j - 1) / j, exactly in integers.
        const std::uint64_t numer = static_cast<std::uint64_t>(b) + static_cast<std::uint64_t>(j) - 1;
        if (level > UINT64_MAX / numer) {
            throw DomainError("carleman_variable_count: count overflows 64 bits");
        }
        level = level * numer / static_cast<std::uint64_t>(j);
        if (total > UINT64_MAX - level) {
            throw DomainError("carleman_variable_count: count overflows 64 bits");
        }
        total += level;
    }
    VariableCount out;
    out.variables = total;
    out.qubits = 0;
    std::uint64_t cap = 1;
    while (cap < total) {
        cap <<= 1;
        ++out.qubits;
    }
    return out;
}

/// Qubit estimate for amplitude-encoded turbulence at Reynolds number Re:
/// Q = 3 log2(Re).
inline double qubit_estimate(double re) {
    if (!(re > 1.0)) throw DomainError("qubit_estimate: requires Re > 1");
    return 3.0 * std::log2(re);
}

struct TelescopicResult {
    Eigen::MatrixXd propagator;  // M^T
    /// Max periodic L1 site distance coupled by M^p, for p = 1..T.
    std::vector<int> site_bandwidth;
};

namespace detail {

inline int site_l1_distance(const linalg::Grid& g, int s_row, int s_col) {
    auto axis_dist = [](int a, int b, int n) {
        int d = std::abs(a - b);
        return std::min(d, n - d);
    };
    return axis_dist(g.x1(s_row), g.x1(s_col), g.nx) + axis_dist(g.x2(s_row), g.x2(s_col), g.ny);
}

inline int matrix_site_bandwidth(const Eigen::MatrixXd& m, const linalg::Grid& g, int block_rows,
                                 int block_cols) {
    int bw = 0;
    for (int r = 0; r < m.rows(); ++r) {
        const int s_row = r / block_rows;
        for (int c = 0; c < m.cols(); ++c) {
            if (m(r, c) != 0.0) bw = std::max(bw, site_l1_distance(g, s_row, c / block_cols));
        }
    }
    return bw;
}

}  // namespace detail

/// Telescopic single-step propagator M^T (dense materialization) plus the
/// site-bandwidth of every intermediate power. Refused above the dense guard;
/// propagation by repeated application remains available separately.
inline TelescopicResult telescopic_propagator(const lifted::CarlemanOperator& op, int t_steps,
                                              long dense_guard = 5000) {
    if (t_steps < 1) throw DomainError("telescopic_propagator: T must be >= 1");
    if (op.total_dim() > dense_guard) {
        throw ResourceGuardError("telescopic_propagator: dimension exceeds the dense guard");
    }
    // The lifted state is inhomogeneous in site-block size, so bandwidth is
    // measured on the order-1 diagonal block; couplings are local and do not
    // widen it.
    TelescopicResult res;
    const Eigen::MatrixXd m = op.to_dense();
    Eigen::MatrixXd power = m;
    res.site_bandwidth.reserve(static_cast<size_t>(t_steps));
    const linalg::Grid& g = op.grid();
    const int b1 = grad::kComponents;
    for (int p = 1; p <= t_steps; ++p) {
        if (p > 1) power = power * m;
        res.site_bandwidth.push_back(detail::matrix_site_bandwidth(
            power.topLeftCorner(static_cast<long>(g.sites()) * b1, static_cast<long>(g.sites()) * b1),
            g, b1, b1));
    }
    res.propagator = std::move(power);
    return res;
}

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares fit of log(y) = intercept + slope * log(x).
inline FitResult loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw ShapeError("loglog_fit: need at least two matching points");
    }
    const size_t n = xs.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("loglog_fit: values must be positive");
        const double lx = std::log(xs[i]);
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    FitResult fit;
    fit.slope = (dn * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / dn;
    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / dn;
    for (size_t i = 0; i < n; ++i) {
        const double ly = std::log(ys[i]);
        const double pred = fit.intercept + fit.slope * std::log(xs[i]);
        ss_res += (ly - pred) * (ly - pred);
        ss_tot += (ly - mean_y) * (ly - mean_y);
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

struct SweepPoint {
    double x = 0.0;        // N (sites) or T (steps)
    double kappa = 0.0;
    bool ok = false;
    std::string note;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::optional<FitResult> fit;  // over the successful points
};

/// kappa of the one-step Carleman matrix versus lattice size. Sizes are site
/// counts N of square grids (N = L^2).
inline SweepResult condition_sweep_sites(const grad::GradParams& params, int order,
                                         lifted::Closure closure, const std::vector<int>& sizes,
                                         const linalg::ConditionOptions& copt = {}) {
    SweepResult res;
    for (int n_sites : sizes) {
        SweepPoint pt;
        pt.x = n_sites;
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_sites))));
        try {
            if (side * side != n_sites) {
                throw ConfigError("condition_sweep: size is not a perfect square");
            }
            const linalg::Grid grid(side, side);
            const auto op = lifted::build_carleman_operator(params, grid, order, closure);
            if (op.total_dim() <= copt.dense_threshold) {
                pt.kappa = linalg::condition_number(op.to_dense(), copt);
            } else {
                const lifted::CarlemanLinearOp lin(op);
                pt.kappa = linalg::condition_number(static_cast<const linalg::LinearOp&>(lin), copt);
            }
            pt.ok = true;
        } catch (const Error& e) {
            pt.note = e.what();
        }
        res.points.push_back(pt);
    }
    std::vector<double> xs, ys;
    for (const auto& p : res.points) {
        if (p.ok) {
            xs.push_back(p.x);
            ys.push_back(p.kappa);
        }
    }
    if (xs.size() >= 2) res.fit = loglog_fit(xs, ys);
    return res;
}

/// kappa(M^T) versus step count on a fixed grid. Below the dense threshold the
/// powers are accumulated densely and each kappa comes from a full SVD;
/// above it, power/inverse iteration on the implicitly applied power.
inline SweepResult condition_sweep_steps(const grad::GradParams& params, int order,
                                         lifted::Closure closure, const linalg::Grid& grid,
                                         const std::vector<int>& steps,
                                         const linalg::ConditionOptions& copt = {}) {
    SweepResult res;
    const auto op = lifted::build_carleman_operator(params, grid, order, closure);
    res.points.resize(steps.size());
    for (size_t i = 0; i < steps.size(); ++i) res.points[i].x = steps[i];

    if (op.total_dim() <= copt.dense_threshold) {
        // Walk the requested powers in ascending order, reusing the product.
        std::vector<size_t> idx(steps.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return steps[a] < steps[b]; });
        const Eigen::MatrixXd m = op.to_dense();
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m.rows(), m.cols());
        int reached = 0;
        for (size_t i : idx) {
            SweepPoint& pt = res.points[i];
            try {
                if (steps[i] < 1) throw DomainError("condition_sweep: T must be >= 1");
                while (reached < steps[i]) {
                    power = power * m;
                    ++reached;
                }
                pt.kappa = linalg::condition_number(power, copt);
                pt.ok = true;
            } catch (const Error& e) {
                pt.note = e.what();
            }
        }
    } else {
        const lifted::CarlemanLinearOp lin(op);
        for (size_t i = 0; i < steps.size(); ++i) {
            SweepPoint& pt = res.points[i];
            try {
                if (steps[i] < 1) throw DomainError("condition_sweep: T must be >= 1");
                const linalg::OperatorPower powered(lin, steps[i]);
                pt.kappa =
                    linalg::condition_number(static_cast<const linalg::LinearOp&>(powered), copt);
                pt.ok = true;
            } catch (const Error& e) {
                pt.note = e.what();
            }
        }
    }
    std::vector<double> xs, ys;
    for (const auto& p : res.points) {
        if (p.ok) {
            xs.push_back(p.x);
            ys.push_back(p.kappa);
        }
    }
    if (xs.size() >= 2) res.fit = loglog_fit(xs, ys);
    return res;
}

enum class SolverKind { hhl, cks };

/// Abstract quantum linear-solver cost with g = 6 (per-site first-order block
/// dimension in 2D) and unit constant factor, log base 2:
///   HHL: log2(g^k N) s^2 kappa^2 / eps
///   CKS: log2(g^k N / eps) kappa
/// Comparative use only; the absolute scale is not physical.
inline double solver_complexity(SolverKind kind, double n_sites, int k, double kappa, double eps,
                                double sparsity) {
    if (!(n_sites > 0.0) || k < 1 || !(kappa > 0.0) || !(sparsity > 0.0) || !(eps > 0.0) ||
        !(eps < 1.0)) {
        throw DomainError("solver_complexity: arguments must be positive with eps < 1");
    }
    const double g = 6.0;
    const double log_dim = k * std::log2(g) + std::log2(n_sites);
    if (kind == SolverKind::hhl) {
        return log_dim * sparsity * sparsity * kappa * kappa / eps;
    }
    return (log_dim + std::log2(1.0 / eps)) * kappa;
}

}  // namespace carleman::analysis
