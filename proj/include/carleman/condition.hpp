#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <memory>

#include "carleman/block_sparse.hpp"
#include "carleman/errors.hpp"

namespace carleman::linalg {

struct ConditionOptions {
    /// Dimensions up to this use a full SVD; above it, power/inverse iteration.
    int dense_threshold = 5000;
    /// Relative tolerance on the extreme singular values (iterative path).
    double rel_tol = 1e-6;
    long max_iterations = 200000;
    /// sigma_min below singular_ratio * sigma_max counts as singular.
    double singular_ratio = 1e-14;
};

/// Square operator with forward, transposed, and inverse actions. The inverse
/// actions back the inverse-iteration estimate of sigma_min.
class LinearOp {
public:
    virtual ~LinearOp() = default;
    virtual long dim() const = 0;
    virtual void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;
    virtual void apply_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;
    virtual void solve(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;
    virtual void solve_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const = 0;
};

/// Sparse matrix with a one-time LU factorization.
class FactorizedSparseOp : public LinearOp {
public:
    explicit FactorizedSparseOp(const Eigen::SparseMatrix<double, Eigen::RowMajor>& m)
        : a_(m), at_(m.transpose()) {
        if (m.rows() != m.cols()) throw ShapeError("FactorizedSparseOp: operator must be square");
        Eigen::SparseMatrix<double> col_major(m);
        lu_.compute(col_major);
        if (lu_.info() != Eigen::Success) {
            throw SingularOperatorError("sparse LU factorization failed (singular operator?)");
        }
    }

    long dim() const override { return a_.rows(); }
    void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override { y = a_ * x; }
    void apply_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override { y = at_ * x; }
    void solve(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override { y = lu_.solve(x); }
    void solve_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        y = lu_.transpose().solve(x);
    }

private:
    Eigen::SparseMatrix<double, Eigen::RowMajor> a_, at_;
    // SparseLU::transpose() is not const-qualified in Eigen 3.4.
    mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// T-th power of a base operator; applies the base T times per action.
class OperatorPower : public LinearOp {
public:
    OperatorPower(const LinearOp& base, int power) : base_(base), power_(power) {
        if (power < 1) throw DomainError("OperatorPower: power must be >= 1");
    }

    long dim() const override { return base_.dim(); }
    void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        repeat(x, y, &LinearOp::apply);
    }
    void apply_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        repeat(x, y, &LinearOp::apply_transpose);
    }
    void solve(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        repeat(x, y, &LinearOp::solve);
    }
    void solve_transpose(const Eigen::VectorXd& x, Eigen::VectorXd& y) const override {
        repeat(x, y, &LinearOp::solve_transpose);
    }

private:
    using Action = void (LinearOp::*)(const Eigen::VectorXd&, Eigen::VectorXd&) const;
    void repeat(const Eigen::VectorXd& x, Eigen::VectorXd& y, Action act) const {
        Eigen::VectorXd cur = x, next(x.size());
        for (int i = 0; i < power_; ++i) {
            (base_.*act)(cur, next);
            cur.swap(next);
        }
        y = cur;
    }

    const LinearOp& base_;
    int power_;
};

struct SingularPair {
    double sigma_max = 0.0;
    double sigma_min = 0.0;
};

namespace detail {

// Deterministic, linearly independent start block.
inline Eigen::MatrixXd start_block(long n, int p) {
    Eigen::MatrixXd v(n, p);
    for (int c = 0; c < p; ++c) {
        for (long i = 0; i < n; ++i) {
            v(i, c) = std::sin(0.7 * static_cast<double>(i) + 1.1 * c + 0.3) +
                      0.25 * std::cos(1.3 * static_cast<double>(i) * (c + 1));
        }
    }
    return v;
}

inline void orthonormalize(Eigen::MatrixXd& v) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    v = qr.householderQ() * Eigen::MatrixXd::Identity(v.rows(), v.cols());
}

// Block power (subspace) iteration on a symmetric PSD pair: each sweep maps
// V -> first(V) = W, takes lambda_max(W^T W) as the Ritz estimate, then
// V <- orth(second(W)). The block makes the estimate robust to the eigenvalue
// multiplicity that grid translation symmetry produces. Stops when the
// estimate is stable to 0.1 * rel_tol over 10 consecutive sweeps.
template <typename First, typename Second>
double block_iterate_lambda_max(long n, const ConditionOptions& opt, First first, Second second) {
    const int p = static_cast<int>(std::min<long>(8, n));
    Eigen::MatrixXd v = start_block(n, p);
    orthonormalize(v);
    Eigen::MatrixXd w(n, p), u(n, p);
    Eigen::VectorXd in(n), out(n);
    double lambda_prev = -1.0;
    int stable = 0;
    const long sweeps = std::max<long>(1, opt.max_iterations / (2 * p));
    for (long it = 0; it < sweeps; ++it) {
        for (int c = 0; c < p; ++c) {
            in = v.col(c);
            first(in, out);
            w.col(c) = out;
        }
        const Eigen::MatrixXd gram = w.transpose() * w;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        const double lambda = eig.eigenvalues().maxCoeff();
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw SingularOperatorError("singular value iteration broke down");
        }
        for (int c = 0; c < p; ++c) {
            in = w.col(c);
            second(in, out);
            u.col(c) = out;
        }
        v = u;
        orthonormalize(v);
        if (lambda_prev > 0.0 &&
            std::abs(lambda - lambda_prev) <= 0.1 * opt.rel_tol * lambda) {
            if (++stable >= 10) return lambda;
        } else {
            stable = 0;
        }
        lambda_prev = lambda;
    }
    return lambda_prev;
}

// sigma_max^2 = lambda_max(M^T M).
inline double power_sigma_max(const LinearOp& op, const ConditionOptions& opt) {
    const double lambda = block_iterate_lambda_max(
        op.dim(), opt,
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.apply(x, y); },
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.apply_transpose(x, y); });
    return std::sqrt(lambda);
}

// 1/sigma_min^2 = lambda_max((M^T M)^{-1}) = lambda_max(M^{-1} M^{-T}).
inline double inverse_sigma_min(const LinearOp& op, const ConditionOptions& opt) {
    const double lambda = block_iterate_lambda_max(
        op.dim(), opt,
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.solve_transpose(x, y); },
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { op.solve(x, y); });
    return 1.0 / std::sqrt(lambda);
}

}  // namespace detail

inline SingularPair extreme_singular_values(const LinearOp& op,
                                            const ConditionOptions& opt = {}) {
    SingularPair p;
    p.sigma_max = detail::power_sigma_max(op, opt);
    p.sigma_min = detail::inverse_sigma_min(op, opt);
    return p;
}

/// kappa = sigma_max / sigma_min via the iterative path.
inline double condition_number(const LinearOp& op, const ConditionOptions& opt = {}) {
    const SingularPair p = extreme_singular_values(op, opt);
    if (p.sigma_min < opt.singular_ratio * p.sigma_max) {
        throw SingularOperatorError("condition_number: operator is numerically singular");
    }
    return p.sigma_max / p.sigma_min;
}

/// kappa via full SVD (dense path).
inline double condition_number(const Eigen::MatrixXd& m, const ConditionOptions& opt = {}) {
    if (m.rows() != m.cols()) throw ShapeError("condition_number: matrix must be square");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (smin < opt.singular_ratio * smax) {
        throw SingularOperatorError("condition_number: matrix is numerically singular");
    }
    return smax / smin;
}

/// Dispatches on dimension: dense SVD up to opt.dense_threshold, otherwise
/// power iteration on M^T M for sigma_max and LU-backed inverse iteration for
/// sigma_min.
inline double condition_number(const BlockSparseOperator& op, const ConditionOptions& opt = {}) {
    if (op.rows() != op.cols()) throw ShapeError("condition_number: operator must be square");
    if (op.rows() <= opt.dense_threshold) {
        return condition_number(op.to_dense(), opt);
    }
    FactorizedSparseOp f(op.to_eigen());
    return condition_number(static_cast<const LinearOp&>(f), opt);
}

}  // namespace carleman::linalg
