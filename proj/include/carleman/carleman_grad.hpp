#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "carleman/block_sparse.hpp"
#include "carleman/condition.hpp"
#include "carleman/errors.hpp"
#include "carleman/flow_field.hpp"
#include "carleman/grid.hpp"
#include "carleman/local_matrices.hpp"
#include "carleman/stencil.hpp"

namespace carleman::lifted {

/// Local closures of the lifted transport. `diagonal` keeps the sitewise
/// Kronecker compression of the full product operator; `leibniz` applies each
/// derivative stencil once to the product field with the component matrix
/// inserted per tensor slot. The exact nonlocal lift is available as a
/// small-grid oracle (exact_nonlocal_lift).
enum class Closure { diagonal, leibniz };

inline const char* closure_name(Closure c) {
    return c == Closure::diagonal ? "diagonal" : "leibniz";
}

inline long order_dim(int j) {
    long d = 1;
    for (int i = 0; i < j; ++i) d *= grad::kComponents;
    return d;
}

/// Concatenated Carleman orders 1..K: per site, the full (non-symmetrized)
/// tensor powers of the six-component state. Block j holds 6^j reals per site,
/// site-major with the tensor index varying fastest.
struct LiftedState {
    linalg::Grid grid;
    int order = 1;
    std::vector<double> data;

    LiftedState() = default;
    LiftedState(const linalg::Grid& g, int k) : grid(g), order(k) {
        long total = 0;
        for (int j = 1; j <= k; ++j) total += order_dim(j) * g.sites();
        data.assign(static_cast<size_t>(total), 0.0);
    }

    long block_offset(int j) const {
        long off = 0;
        for (int i = 1; i < j; ++i) off += order_dim(i) * grid.sites();
        return off;
    }
    long block_size(int j) const { return order_dim(j) * grid.sites(); }

    std::span<double> block(int j) {
        return {data.data() + block_offset(j), static_cast<size_t>(block_size(j))};
    }
    std::span<const double> block(int j) const {
        return {data.data() + block_offset(j), static_cast<size_t>(block_size(j))};
    }
};

struct CarlemanBuildOptions {
    /// Memory guard: truncation orders above this are refused.
    int max_order = 5;
    linalg::Stencil d1 = linalg::central_difference(1);
    linalg::Stencil d2 = linalg::central_difference(2);
};

namespace detail {

// filler^(x)(m-1) (x) inserted (x) filler^(x)(j-m), slot m of j (1-based).
inline linalg::SparseBlock slot_insertion(const linalg::SparseBlock& inserted, int slot, int j,
                                          const std::vector<linalg::SparseBlock>& filler_pow) {
    linalg::SparseBlock acc = filler_pow[static_cast<size_t>(slot - 1)];
    acc = (slot == 1) ? inserted : linalg::sparse_kron(acc, inserted);
    if (j - slot > 0) acc = linalg::sparse_kron(acc, filler_pow[static_cast<size_t>(j - slot)]);
    return acc;
}

// Kronecker powers pow[0] = 1x1 identity, pow[p] = base^(x)p.
inline std::vector<linalg::SparseBlock> kron_powers(const linalg::SparseBlock& base, int max_pow) {
    std::vector<linalg::SparseBlock> pow;
    pow.reserve(static_cast<size_t>(max_pow) + 1);
    pow.push_back(linalg::sparse_identity(1));
    for (int p = 1; p <= max_pow; ++p) pow.push_back(linalg::sparse_kron(pow.back(), base));
    return pow;
}

}  // namespace detail

/// One-step first-order operator A-hat = A_loc (x) I_N + A_d1 (x) D1 + A_d2 (x) D2.
inline linalg::BlockSparseOperator first_order_operator(const LocalMatrices& m,
                                                        const linalg::Grid& grid,
                                                        const CarlemanBuildOptions& opts = {}) {
    linalg::BlockSparseOperator op(grid, grad::kComponents, grad::kComponents);
    op.add_uniform_block({0, 0}, linalg::sparse_from_dense(m.a_loc));
    for (const auto& tap : opts.d1.taps) {
        op.add_uniform_block({tap.d1, tap.d2}, linalg::sparse_from_dense(tap.weight * m.a_d1));
    }
    for (const auto& tap : opts.d2.taps) {
        op.add_uniform_block({tap.d1, tap.d2}, linalg::sparse_from_dense(tap.weight * m.a_d2));
    }
    return op;
}

/// Block-upper-triangular lifted one-step operator: T(j,j) evolves order j,
/// T(j,j+1) and T(j,j+2) feed orders j+1 and j+2 back into j (bandwidth 2 in
/// the order index; blocks beyond the truncation are absent).
class CarlemanOperator {
public:
    CarlemanOperator() = default;

    int order() const { return order_; }
    Closure closure() const { return closure_; }
    const linalg::Grid& grid() const { return grid_; }
    const grad::GradParams& params() const { return params_; }

    /// Block T(j, j+dj); nullptr when absent.
    const linalg::BlockSparseOperator* block(int j, int dj) const {
        if (j < 1 || j > order_ || dj < 0 || dj > 2 || j + dj > order_) return nullptr;
        const auto& slot = blocks_[static_cast<size_t>(j - 1)][static_cast<size_t>(dj)];
        return slot ? &*slot : nullptr;
    }

    long total_dim() const {
        long total = 0;
        for (int j = 1; j <= order_; ++j) total += order_dim(j) * grid_.sites();
        return total;
    }

    long block_offset(int j) const {
        long off = 0;
        for (int i = 1; i < j; ++i) off += order_dim(i) * grid_.sites();
        return off;
    }

    void apply(const LiftedState& in, LiftedState& out) const {
        if (in.order != order_ || !(in.grid == grid_)) {
            throw ShapeError("CarlemanOperator::apply: state does not match operator");
        }
        if (out.order != order_ || !(out.grid == grid_)) out = LiftedState(grid_, order_);
        std::fill(out.data.begin(), out.data.end(), 0.0);
        for (int j = 1; j <= order_; ++j) {
            auto out_j = out.block(j);
            for (int dj = 0; dj <= 2; ++dj) {
                const auto* blk = block(j, dj);
                if (blk) blk->apply_add(in.block(j + dj), out_j, true);
            }
        }
    }

    /// Global one-step matrix in the concatenated order-block layout.
    Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen() const {
        std::vector<Eigen::Triplet<double>> trips;
        for (int j = 1; j <= order_; ++j) {
            const long row0 = block_offset(j);
            for (int dj = 0; dj <= 2; ++dj) {
                const auto* blk = block(j, dj);
                if (!blk) continue;
                const long col0 = block_offset(j + dj);
                auto m = blk->to_eigen();
                for (int r = 0; r < m.outerSize(); ++r) {
                    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it;
                         ++it) {
                        trips.emplace_back(row0 + it.row(), col0 + it.col(), it.value());
                    }
                }
            }
        }
        Eigen::SparseMatrix<double, Eigen::RowMajor> m(total_dim(), total_dim());
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        return m;
    }

    Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(to_eigen()); }

    friend CarlemanOperator build_carleman_operator(const grad::GradParams&, const linalg::Grid&,
                                                    int, Closure, const CarlemanBuildOptions&);

private:
    grad::GradParams params_;
    linalg::Grid grid_;
    int order_ = 0;
    Closure closure_ = Closure::diagonal;
    // blocks_[j-1][dj] = T(j, j+dj)
    std::vector<std::array<std::optional<linalg::BlockSparseOperator>, 3>> blocks_;
};

inline CarlemanOperator build_carleman_operator(const grad::GradParams& params,
                                                const linalg::Grid& grid, int order,
                                                Closure closure,
                                                const CarlemanBuildOptions& opts = {}) {
    if (order < 1) throw DomainError("build_carleman_operator: order must be >= 1");
    if (order > opts.max_order) {
        throw ResourceGuardError("build_carleman_operator: truncation order exceeds the memory guard");
    }
    const LocalMatrices m = build_local_matrices(params);
    const linalg::SparseBlock a_loc = linalg::sparse_from_dense(m.a_loc);
    const linalg::SparseBlock b_mat = linalg::sparse_from_dense(m.b);
    const linalg::SparseBlock c_mat = linalg::sparse_from_dense(m.c);
    const linalg::BlockSparseOperator a_hat = first_order_operator(m, grid, opts);

    CarlemanOperator op;
    op.params_ = params;
    op.grid_ = grid;
    op.order_ = order;
    op.closure_ = closure;
    op.blocks_.resize(static_cast<size_t>(order));

    const auto a_loc_pow = detail::kron_powers(a_loc, order);

    for (int j = 1; j <= order; ++j) {
        // T(j,j): order-preserving evolution.
        if (j == 1) {
            op.blocks_[0][0] = a_hat;
        } else if (closure == Closure::diagonal) {
            // Sitewise Kronecker compression of A-hat^(x)j.
            linalg::BlockSparseOperator cur = a_hat;
            for (int i = 2; i <= j; ++i) cur = linalg::kron_compress(cur, a_hat);
            op.blocks_[static_cast<size_t>(j - 1)][0] = std::move(cur);
        } else {
            // Leibniz lift: local part A_loc^(x)j; each derivative stencil acts
            // once on the product field with A_dp inserted per tensor slot and
            // A_loc in the remaining slots (the A (x) B + B (x) A pattern).
            const int dim_j = static_cast<int>(order_dim(j));
            linalg::BlockSparseOperator cur(grid, dim_j, dim_j);
            cur.add_uniform_block({0, 0}, a_loc_pow[static_cast<size_t>(j)]);

            const linalg::SparseBlock a_d[2] = {linalg::sparse_from_dense(m.a_d1),
                                                linalg::sparse_from_dense(m.a_d2)};
            const linalg::Stencil* stencils[2] = {&opts.d1, &opts.d2};
            for (int axis = 0; axis < 2; ++axis) {
                linalg::SparseBlock lift(dim_j, dim_j);
                for (int slot = 1; slot <= j; ++slot) {
                    lift += detail::slot_insertion(a_d[axis], slot, j, a_loc_pow);
                }
                lift.makeCompressed();
                for (const auto& tap : stencils[axis]->taps) {
                    const linalg::SparseBlock scaled = tap.weight * lift;
                    cur.add_uniform_block({tap.d1, tap.d2}, scaled);
                }
            }
            op.blocks_[static_cast<size_t>(j - 1)][0] = std::move(cur);
        }

        // T(j,j+1) and T(j,j+2): purely local couplings with A_loc in the
        // non-B/C slots.
        const linalg::SparseBlock* feeds[2] = {&b_mat, &c_mat};
        for (int dj = 1; dj <= 2; ++dj) {
            if (j + dj > order) continue;
            const int rows = static_cast<int>(order_dim(j));
            const int cols = static_cast<int>(order_dim(j + dj));
            linalg::SparseBlock sum(rows, cols);
            for (int slot = 1; slot <= j; ++slot) {
                sum += detail::slot_insertion(*feeds[dj - 1], slot, j, a_loc_pow);
            }
            sum.makeCompressed();
            linalg::BlockSparseOperator coupling(grid, rows, cols);
            coupling.add_uniform_block({0, 0}, sum);
            op.blocks_[static_cast<size_t>(j - 1)][static_cast<size_t>(dj)] = std::move(coupling);
        }
    }
    return op;
}

/// W^(j)(x) = V0(x)^(x)j for j = 1..K.
inline LiftedState lift_initial_state(const grad::FlowField& v0, int order) {
    if (order < 1) throw DomainError("lift_initial_state: order must be >= 1");
    LiftedState s(v0.grid, order);
    const int n_sites = v0.grid.sites();
    for (int site = 0; site < n_sites; ++site) {
        const double* v = v0.site(site);
        std::vector<double> power(v, v + grad::kComponents);  // V^(x)1
        {
            auto blk = s.block(1);
            std::copy(power.begin(), power.end(),
                      blk.begin() + static_cast<long>(site) * grad::kComponents);
        }
        for (int j = 2; j <= order; ++j) {
            std::vector<double> next(static_cast<size_t>(order_dim(j)));
            size_t idx = 0;
            for (double p : power) {
                for (int c = 0; c < grad::kComponents; ++c) next[idx++] = p * v[c];
            }
            power = std::move(next);
            auto blk = s.block(j);
            std::copy(power.begin(), power.end(),
                      blk.begin() + static_cast<long>(site) * order_dim(j));
        }
    }
    return s;
}

inline grad::FlowField extract_order1(const LiftedState& s) {
    grad::FlowField f(s.grid);
    const auto blk = s.block(1);
    std::copy(blk.begin(), blk.end(), f.data.begin());
    return f;
}

/// Propagates s_{t+1} = op s_t for `steps` steps, invoking
/// `on_step(step, state)` after each (step counts from 1). Returns the final
/// lifted state. Throws InstabilityError on NaN/overflow.
inline LiftedState carleman_run(const CarlemanOperator& op, LiftedState state, long steps,
                                const std::function<void(long, const LiftedState&)>& on_step = {}) {
    LiftedState next(op.grid(), op.order());
    for (long n = 1; n <= steps; ++n) {
        op.apply(state, next);
        state.data.swap(next.data);
        double worst = 0.0;
        for (double v : state.data) worst = std::max(worst, std::abs(v));
        if (!(worst < 1e12)) {
            throw InstabilityError(n, "carleman_run: NaN/overflow in lifted state");
        }
        if (on_step) on_step(n, state);
    }
    return state;
}

/// Convenience wrapper returning the order-1 block after every step
/// (index 0 = initial state).
inline std::vector<grad::FlowField> carleman_run_series(const CarlemanOperator& op,
                                                        const LiftedState& s0, long steps) {
    std::vector<grad::FlowField> series;
    series.reserve(static_cast<size_t>(steps) + 1);
    series.push_back(extract_order1(s0));
    carleman_run(op, s0, steps,
                 [&](long, const LiftedState& s) { series.push_back(extract_order1(s)); });
    return series;
}

struct NonlocalDeviationRow {
    long step = 0;
    double max_diagonal = 0.0;
    double mean_diagonal = 0.0;
    double max_leibniz = 0.0;
    double mean_leibniz = 0.0;
};

/// Small-grid oracle for the lifted transport closure: embeds the same-site
/// product field W(x) = V0(x) (x) V0(x) block-diagonally into the full
/// (6N)^2 pair space (cross-site pairs zero, i.e. on the local manifold),
/// evolves it with the exact Kronecker operator (A-hat (x) A-hat) as
/// Z <- A Z A^T, and compares the same-site diagonal against both local
/// closures of T(2,2) after every step. Cross-site pairs populate at O(dt)
/// and feed back at O(dt), so the local closures deviate at O(dt^2) per step.
inline std::vector<NonlocalDeviationRow> exact_nonlocal_lift(const grad::FlowField& v0,
                                                             const grad::GradParams& params,
                                                             long steps,
                                                             const CarlemanBuildOptions& opts = {}) {
    const linalg::Grid& grid = v0.grid;
    if (grid.sites() > 16) {
        throw ResourceGuardError("exact_nonlocal_lift: grid limited to N <= 16 sites");
    }
    const LocalMatrices m = build_local_matrices(params);
    const Eigen::MatrixXd a_full = first_order_operator(m, grid, opts).to_dense();

    const int n6 = grid.sites() * grad::kComponents;
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n6, n6);
    for (int s = 0; s < grid.sites(); ++s) {
        const double* v = v0.site(s);
        for (int a = 0; a < grad::kComponents; ++a) {
            for (int b = 0; b < grad::kComponents; ++b) {
                z(grad::kComponents * s + a, grad::kComponents * s + b) = v[a] * v[b];
            }
        }
    }

    const auto t22_diag =
        build_carleman_operator(params, grid, 2, Closure::diagonal, opts).block(2, 0)->to_eigen();
    const auto t22_leib =
        build_carleman_operator(params, grid, 2, Closure::leibniz, opts).block(2, 0)->to_eigen();

    const long w_dim = static_cast<long>(grid.sites()) * 36;
    Eigen::VectorXd w_diag(w_dim), w_leib(w_dim);
    for (int s = 0; s < grid.sites(); ++s) {
        for (int a = 0; a < 6; ++a) {
            for (int b = 0; b < 6; ++b) {
                w_diag[36 * s + 6 * a + b] = z(6 * s + a, 6 * s + b);
            }
        }
    }
    w_leib = w_diag;

    std::vector<NonlocalDeviationRow> report;
    report.reserve(static_cast<size_t>(steps));
    for (long n = 1; n <= steps; ++n) {
        z = a_full * z * a_full.transpose();
        w_diag = t22_diag * w_diag;
        w_leib = t22_leib * w_leib;
        NonlocalDeviationRow row;
        row.step = n;
        double sum_d = 0.0, sum_l = 0.0;
        for (int s = 0; s < grid.sites(); ++s) {
            for (int a = 0; a < 6; ++a) {
                for (int b = 0; b < 6; ++b) {
                    const double exact = z(6 * s + a, 6 * s + b);
                    const double dd = std::abs(exact - w_diag[36 * s + 6 * a + b]);
                    const double dl = std::abs(exact - w_leib[36 * s + 6 * a + b]);
                    row.max_diagonal = std::max(row.max_diagonal, dd);
                    row.max_leibniz = std::max(row.max_leibniz, dl);
                    sum_d += dd;
                    sum_l += dl;
                }
            }
        }
        row.mean_diagonal = sum_d / static_cast<double>(w_dim);
        row.mean_leibniz = sum_l / static_cast<double>(w_dim);
        report.push_back(row);
    }
    return report;
}

/// LinearOp view of the lifted one-step matrix. The inverse actions exploit
/// block triangularity: one LU per diagonal block plus back-substitution over
/// the order index.
class CarlemanLinearOp : public linalg::LinearOp {
public:
    explicit CarlemanLinearOp(const CarlemanOperator& op) : order_(op.order()) {
        dim_ = op.total_dim();
        offsets_.resize(static_cast<size_t>(order_) + 1);
        for (int j = 1; j <= order_; ++j) {
            offsets_[static_cast<size_t>(j)] = op.block_offset(j);
            auto d = op.block(j, 0)->to_eigen();
            diag_.push_back(d);
            diag_t_.push_back(Eigen::SparseMatrix<double, Eigen::RowMajor>(d.transpose()));
            auto lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            lu->compute(Eigen::SparseMatrix<double>(d));
            if (lu->info() != Eigen::Success) {
                throw SingularOperatorError("CarlemanLinearOp: diagonal block is singular");
            }
            lu_.push_back(std::move(lu));
            for (int dj = 1; dj <= 2; ++dj) {
                const auto* blk = op.block(j, dj);
                if (blk) {
                    auto c = blk->to_eigen();
                    coupling_[{j, dj}] = c;
                    coupling_t_[{j, dj}] = Eigen::SparseMatrix<double, Eigen::RowMajor>(c.transpose());
                }
            }
        }
    }

    long dim() const override { return dim_; }

    void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        y.resize(dim_);
        for (int j = 1; j <= order_; ++j) {
            auto seg = segment(y, j);
            seg = diag_[static_cast<size_t>(j - 1)] * segment(x, j);
            for (int dj = 1; dj <= 2; ++dj) {
                auto it = coupling_.find({j, dj});
                if (it != coupling_.end()) seg += it->second * segment(x, j + dj);
            }
        }
    }

    void apply_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        y.resize(dim_);
        for (int j = 1; j <= order_; ++j) {
            auto seg = segment(y, j);
            seg = diag_t_[static_cast<size_t>(j - 1)] * segment(x, j);
            for (int dj = 1; dj <= 2; ++dj) {
                const int src = j - dj;
                if (src < 1) continue;
                auto it = coupling_t_.find({src, dj});
                if (it != coupling_t_.end()) seg += it->second * segment(x, src);
            }
        }
    }

    void solve(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        y.resize(dim_);
        for (int j = order_; j >= 1; --j) {
            Eigen::VectorXd rhs = segment(x, j);
            for (int dj = 1; dj <= 2; ++dj) {
                auto it = coupling_.find({j, dj});
                if (it != coupling_.end()) rhs -= it->second * segment(y, j + dj);
            }
            segment(y, j) = lu_[static_cast<size_t>(j - 1)]->solve(rhs);
        }
    }

    void solve_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        y.resize(dim_);
        for (int j = 1; j <= order_; ++j) {
            Eigen::VectorXd rhs = segment(x, j);
            for (int dj = 1; dj <= 2; ++dj) {
                const int src = j - dj;
                if (src < 1) continue;
                auto it = coupling_t_.find({src, dj});
                if (it != coupling_t_.end()) rhs -= it->second * segment(y, src);
            }
            segment(y, j) = lu_[static_cast<size_t>(j - 1)]->transpose().solve(rhs);
        }
    }

private:
    struct Key {
        int j, dj;
        bool operator<(const Key& o) const { return j != o.j ? j < o.j : dj < o.dj; }
    };

    Eigen::VectorBlock<Eigen::VectorXd> segment(Eigen::VectorXd& v, int j) const {
        const long len = (j == order_) ? dim_ - offsets_[static_cast<size_t>(j)]
                                       : offsets_[static_cast<size_t>(j + 1)] -
                                             offsets_[static_cast<size_t>(j)];
        return v.segment(offsets_[static_cast<size_t>(j)], len);
    }
    Eigen::VectorBlock<const Eigen::VectorXd> segment(const Eigen::VectorXd& v, int j) const {
        const long len = (j == order_) ? dim_ - offsets_[static_cast<size_t>(j)]
                                       : offsets_[static_cast<size_t>(j + 1)] -
                                             offsets_[static_cast<size_t>(j)];
        return v.segment(offsets_[static_cast<size_t>(j)], len);
    }

    int order_;
    long dim_ = 0;
    std::vector<long> offsets_;
    std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> diag_, diag_t_;
    std::vector<std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>>> lu_;
    std::map<Key, Eigen::SparseMatrix<double, Eigen::RowMajor>> coupling_, coupling_t_;
};

}  // namespace carleman::lifted
