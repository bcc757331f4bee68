#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <span>
#include <vector>

#include "carleman/errors.hpp"
#include "carleman/grid.hpp"
#include "carleman/stencil.hpp"

namespace carleman::linalg {

/// Component block of a grid operator. Row-major so the matvec kernel can walk
/// rows contiguously in a fixed order.
using SparseBlock = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline SparseBlock sparse_identity(int n) {
    SparseBlock m(n, n);
    m.setIdentity();
    return m;
}

/// Exact zeros are dropped; everything else kept verbatim.
inline SparseBlock sparse_from_dense(const Eigen::MatrixXd& d) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < d.rows(); ++r) {
        for (int c = 0; c < d.cols(); ++c) {
            if (d(r, c) != 0.0) trips.emplace_back(r, c, d(r, c));
        }
    }
    SparseBlock m(d.rows(), d.cols());
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

inline SparseBlock sparse_kron(const SparseBlock& a, const SparseBlock& b) {
    SparseBlock out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(a.nonZeros()) * static_cast<size_t>(b.nonZeros()));
    for (int ra = 0; ra < a.outerSize(); ++ra) {
        for (SparseBlock::InnerIterator ia(a, ra); ia; ++ia) {
            for (int rb = 0; rb < b.outerSize(); ++rb) {
                for (SparseBlock::InnerIterator ib(b, rb); ib; ++ib) {
                    trips.emplace_back(ia.row() * b.rows() + ib.row(),
                                       ia.col() * b.cols() + ib.col(),
                                       ia.value() * ib.value());
                }
            }
        }
    }
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

inline SparseBlock sparse_kron_chain(const std::vector<const SparseBlock*>& factors) {
    if (factors.empty()) throw ShapeError("sparse_kron_chain: empty factor list");
    SparseBlock acc = *factors.front();
    for (size_t i = 1; i < factors.size(); ++i) acc = sparse_kron(acc, *factors[i]);
    return acc;
}

/// Block-sparse operator over a periodic grid.
///
/// The operator maps (site, site-offset) pairs to component blocks:
///   out(x) = sum_offsets block(x, d) * in(x + d).
/// Blocks may be shared by all sites (the translation-invariant case) or
/// stored per site. Operator dimension is block_rows*N x block_cols*N with the
/// site-major, component-fastest layout of Grid.
class BlockSparseOperator {
public:
    struct Offset {
        int d1 = 0;
        int d2 = 0;
        bool operator==(const Offset&) const = default;
    };

    BlockSparseOperator() = default;
    BlockSparseOperator(Grid grid, int block_rows, int block_cols)
        : grid_(grid), block_rows_(block_rows), block_cols_(block_cols) {
        if (block_rows < 1 || block_cols < 1) {
            throw ShapeError("BlockSparseOperator: block dimensions must be positive");
        }
    }

    const Grid& grid() const { return grid_; }
    int block_rows() const { return block_rows_; }
    int block_cols() const { return block_cols_; }
    long rows() const { return static_cast<long>(block_rows_) * grid_.sites(); }
    long cols() const { return static_cast<long>(block_cols_) * grid_.sites(); }

    const std::vector<Offset>& offsets() const { return offsets_; }

    /// Adds (accumulating) the same block at every site for offset d.
    void add_uniform_block(Offset d, const SparseBlock& b) {
        check_block(b);
        int idx = find_or_insert(d);
        auto& slot = site_blocks_[idx];
        if (slot.size() == 1) {
            slot[0] += b;
            slot[0].makeCompressed();
        } else {
            for (auto& blk : slot) {
                blk += b;
                blk.makeCompressed();
            }
        }
    }

    /// Adds (accumulating) a block at one site only. Promotes the offset to
    /// per-site storage.
    void add_site_block(Offset d, int site, const SparseBlock& b) {
        check_block(b);
        if (site < 0 || site >= grid_.sites()) {
            throw ShapeError("add_site_block: site out of range");
        }
        int idx = find_or_insert(d);
        auto& slot = site_blocks_[idx];
        if (slot.size() == 1) {
            slot.assign(static_cast<size_t>(grid_.sites()), slot[0]);
        }
        slot[static_cast<size_t>(site)] += b;
        slot[static_cast<size_t>(site)].makeCompressed();
    }

    const SparseBlock& block(int site, Offset d) const {
        for (size_t i = 0; i < offsets_.size(); ++i) {
            if (offsets_[i] == d) {
                const auto& slot = site_blocks_[i];
                return slot.size() == 1 ? slot[0] : slot[static_cast<size_t>(site)];
            }
        }
        throw ShapeError("block: offset not present");
    }

    bool has_offset(Offset d) const {
        return std::find(offsets_.begin(), offsets_.end(), d) != offsets_.end();
    }

    /// out (+)= op * in. Deterministic: sites in row-major order, offsets in
    /// insertion order, block rows in CSR order.
    void apply_add(std::span<const double> in, std::span<double> out, bool accumulate) const {
        if (static_cast<long>(in.size()) != cols() || static_cast<long>(out.size()) != rows()) {
            throw ShapeError("apply: vector length does not match operator shape");
        }
        if (!accumulate) std::fill(out.begin(), out.end(), 0.0);
        const int n_sites = grid_.sites();
        for (int s = 0; s < n_sites; ++s) {
            double* o = out.data() + static_cast<long>(s) * block_rows_;
            for (size_t k = 0; k < offsets_.size(); ++k) {
                const auto& slot = site_blocks_[k];
                const SparseBlock& b = slot.size() == 1 ? slot[0] : slot[static_cast<size_t>(s)];
                const int nbr = grid_.shifted(s, offsets_[k].d1, offsets_[k].d2);
                const double* i = in.data() + static_cast<long>(nbr) * block_cols_;
                const double* vals = b.valuePtr();
                const int* cols = b.innerIndexPtr();
                const int* rptr = b.outerIndexPtr();
                for (int r = 0; r < block_rows_; ++r) {
                    double acc = o[r];
                    for (int p = rptr[r]; p < rptr[r + 1]; ++p) acc += vals[p] * i[cols[p]];
                    o[r] = acc;
                }
            }
        }
    }

    std::vector<double> apply(std::span<const double> in) const {
        std::vector<double> out(static_cast<size_t>(rows()), 0.0);
        apply_add(in, out, false);
        return out;
    }

    long nnz() const {
        long total = 0;
        for (size_t k = 0; k < offsets_.size(); ++k) {
            const auto& slot = site_blocks_[k];
            if (slot.size() == 1) {
                total += static_cast<long>(slot[0].nonZeros()) * grid_.sites();
            } else {
                for (const auto& b : slot) total += b.nonZeros();
            }
        }
        return total;
    }

    /// Maximum number of nonzeros on any scalar row of the assembled operator.
    int max_row_nnz() const {
        std::vector<int> per_row(static_cast<size_t>(block_rows_), 0);
        int worst = 0;
        const int n_sites = grid_.sites();
        for (int s = 0; s < n_sites; ++s) {
            std::fill(per_row.begin(), per_row.end(), 0);
            bool all_uniform = true;
            for (size_t k = 0; k < offsets_.size(); ++k) {
                const auto& slot = site_blocks_[k];
                if (slot.size() != 1) all_uniform = false;
                const SparseBlock& b = slot.size() == 1 ? slot[0] : slot[static_cast<size_t>(s)];
                const int* rptr = b.outerIndexPtr();
                for (int r = 0; r < block_rows_; ++r) per_row[static_cast<size_t>(r)] += rptr[r + 1] - rptr[r];
            }
            for (int r = 0; r < block_rows_; ++r) worst = std::max(worst, per_row[static_cast<size_t>(r)]);
            if (all_uniform) break;  // every site identical
        }
        return worst;
    }

    Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen() const {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(nnz()));
        const int n_sites = grid_.sites();
        for (int s = 0; s < n_sites; ++s) {
            for (size_t k = 0; k < offsets_.size(); ++k) {
                const auto& slot = site_blocks_[k];
                const SparseBlock& b = slot.size() == 1 ? slot[0] : slot[static_cast<size_t>(s)];
                const int nbr = grid_.shifted(s, offsets_[k].d1, offsets_[k].d2);
                for (int r = 0; r < b.outerSize(); ++r) {
                    for (SparseBlock::InnerIterator it(b, r); it; ++it) {
                        trips.emplace_back(s * block_rows_ + static_cast<int>(it.row()),
                                           nbr * block_cols_ + static_cast<int>(it.col()),
                                           it.value());
                    }
                }
            }
        }
        Eigen::SparseMatrix<double, Eigen::RowMajor> m(rows(), cols());
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        return m;
    }

    Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(to_eigen()); }

private:
    void check_block(const SparseBlock& b) const {
        if (b.rows() != block_rows_ || b.cols() != block_cols_) {
            throw ShapeError("block dimensions do not match operator");
        }
    }

    int find_or_insert(Offset d) {
        for (size_t i = 0; i < offsets_.size(); ++i) {
            if (offsets_[i] == d) return static_cast<int>(i);
        }
        offsets_.push_back(d);
        site_blocks_.emplace_back(1, SparseBlock(block_rows_, block_cols_));
        return static_cast<int>(offsets_.size()) - 1;
    }

    Grid grid_;
    int block_rows_ = 1;
    int block_cols_ = 1;
    std::vector<Offset> offsets_;
    // Per offset: one shared block (translation-invariant) or one per site.
    std::vector<std::vector<SparseBlock>> site_blocks_;
};

inline BlockSparseOperator identity_operator(const Grid& grid, int n) {
    BlockSparseOperator op(grid, n, n);
    op.add_uniform_block({0, 0}, sparse_identity(n));
    return op;
}

/// Sitewise Kronecker compression of two operators on the same grid: the
/// result's block at (x, d) is blockA(x, d) (x) blockB(x, d). Offsets present
/// in only one operand pair with a zero block and drop out. This restricts the
/// full Kronecker-product evolution to same-site product fields.
inline BlockSparseOperator kron_compress(const BlockSparseOperator& a, const BlockSparseOperator& b) {
    if (!(a.grid() == b.grid())) {
        throw ShapeError("kron_compress: operands live on different grids");
    }
    BlockSparseOperator out(a.grid(), a.block_rows() * b.block_rows(),
                            a.block_cols() * b.block_cols());
    for (const auto& d : a.offsets()) {
        if (!b.has_offset(d)) continue;
        // Uniform if both operands are uniform at this offset; detected by
        // comparing the blocks handed back for site 0 and site 1.
        const int n_sites = a.grid().sites();
        bool uniform = true;
        for (int s = 1; s < n_sites && uniform; ++s) {
            uniform = (&a.block(s, d) == &a.block(0, d)) && (&b.block(s, d) == &b.block(0, d));
        }
        if (uniform) {
            out.add_uniform_block(d, sparse_kron(a.block(0, d), b.block(0, d)));
        } else {
            for (int s = 0; s < n_sites; ++s) {
                out.add_site_block(d, s, sparse_kron(a.block(s, d), b.block(s, d)));
            }
        }
    }
    return out;
}

}  // namespace carleman::linalg
