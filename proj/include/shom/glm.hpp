#pragma once

// Finite-sum generalized linear model
//
//     f(x) = (1/N) sum_i phi(a_i^T x - b_i) + (lambda/2) ||x||^2
//
// with sparse rows a_i, optional per-row offsets b_i (zero for
// classification) and a scalar loss phi.

#include "shom/types.hpp"

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace shom {

enum class LossKind { logistic, squared };

std::string_view to_string(LossKind loss);
LossKind loss_from_string(std::string_view name);

/// Highest derivative order available from scalar_derivatives().
inline constexpr int kMaxDerivativeOrder = 4;

template <typename T>
using DerivativeVector = Eigen::Matrix<T, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDerivativeOrder + 1, 1>;

/// [phi(t), phi'(t), ..., phi^(order)(t)].
///
/// The logistic loss phi(t) = log(1 + e^t) is evaluated as
/// max(t, 0) + log1p(e^-|t|) and its derivatives through the sigmoid and
/// v = sigma (1 - sigma), so nothing overflows for any finite t.
template <typename T>
DerivativeVector<T> scalar_derivatives(LossKind loss, T t, int order)
{
    using std::abs;
    using std::exp;
    using std::isfinite;
    using std::log1p;
    if (order < 0 || order > kMaxDerivativeOrder)
        throw DomainError("scalar_derivatives: order must be in 0..4");
    if (!isfinite(t)) throw DomainError("scalar_derivatives: non-finite argument");

    DerivativeVector<T> d(order + 1);
    if (loss == LossKind::squared) {
        const T all[5] = {T(0.5) * t * t, t, T(1), T(0), T(0)};
        for (int k = 0; k <= order; ++k) d[k] = all[k];
        return d;
    }

    const T e = exp(-abs(t));  // in (0, 1]
    const T sigma = t >= T(0) ? T(1) / (T(1) + e) : e / (T(1) + e);
    const T v = e / ((T(1) + e) * (T(1) + e));
    const T all[5] = {
        (t > T(0) ? t : T(0)) + log1p(e),
        sigma,
        v,
        v * (T(1) - T(2) * sigma),
        v * (T(1) - T(6) * v),
    };
    for (int k = 0; k <= order; ++k) d[k] = all[k];
    return d;
}

/// sup_t |phi^(order)(t)| for order in 2..4, found by grid search refined
/// with golden-section steps. Cached per (loss, order).
double derivative_sup(LossKind loss, int order);

class Dataset {
public:
    Dataset() = default;

    /// Takes ownership of the row matrix. `offsets` may be empty (all zero).
    Dataset(SparseRows rows, Vector offsets, LossKind loss, bool label_folded = false);

    Index size() const { return rows_.rows(); }
    Index dim() const { return rows_.cols(); }
    LossKind loss() const { return loss_; }
    bool label_folded() const { return label_folded_; }

    const SparseRows& rows() const { return rows_; }
    const Vector& offsets() const { return offsets_; }
    const Vector& row_sq_norms() const { return row_sq_norms_; }

    /// Features (column indices) and values of row i.
    SparseRows::InnerIterator row(Index i) const { return {rows_, i}; }

private:
    SparseRows rows_;
    Vector offsets_;
    Vector row_sq_norms_;
    LossKind loss_ = LossKind::logistic;
    bool label_folded_ = false;
};

/// Builds a dataset from dense rows (tests and synthetic generators).
Dataset dataset_from_dense(const Matrix& rows, LossKind loss, const Vector& offsets = Vector());

struct Problem {
    Dataset data;
    double lambda = 0.0;

    Problem() = default;
    Problem(Dataset d, double l);

    Index size() const { return data.size(); }
    Index dim() const { return data.dim(); }
};

/// a_i^T x - b_i for every row.
Vector linear_predictor(const Dataset& data, const ConstVectorRef& x);

double objective(const Problem& problem, const ConstVectorRef& x);
Vector gradient(const Problem& problem, const ConstVectorRef& x);
/// Dense Hessian (1/N) A^T diag(phi'') A + lambda I.
Matrix hessian(const Problem& problem, const ConstVectorRef& x);

/// Upper bound on the Lipschitz constant (Euclidean norm) of the p-th
/// derivative of the data term: (1/N) sum_i c_{p+1} ||a_i||^{p+1} with
/// c_{p+1} = sup |phi^(p+1)|. p in 1..3.
double lipschitz_estimate(const Problem& problem, int p);

/// Same bound taken with the largest row norm instead of the average.
double lipschitz_estimate_max(const Problem& problem, int p);

}  // namespace shom
