#include "shom/glm.hpp"

#include <algorithm>
#include <map>
#include <mutex>

namespace shom {

std::string_view to_string(LossKind loss)
{
    return loss == LossKind::logistic ? "logistic" : "squared";
}

LossKind loss_from_string(std::string_view name)
{
    if (name == "logistic") return LossKind::logistic;
    if (name == "squared") return LossKind::squared;
    throw DomainError("unknown loss '" + std::string(name) + "'");
}

namespace {

double abs_derivative(LossKind loss, int order, double t)
{
    return std::abs(scalar_derivatives(loss, t, order)[order]);
}

double maximize_abs_derivative(LossKind loss, int order)
{
    // The logistic derivatives decay like e^-|t|; the maximizer lies well
    // inside [-20, 20].
    constexpr double lo = -20.0;
    constexpr double step = 1e-2;
    constexpr int steps = 4000;
    double best_t = lo;
    double best = -1.0;
    for (int k = 0; k <= steps; ++k) {
        const double t = lo + step * k;
        const double v = abs_derivative(loss, order, t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    // golden-section refinement on the bracketing cell
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = best_t - step;
    double b = best_t + step;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        if (abs_derivative(loss, order, c) > abs_derivative(loss, order, d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - invphi * (b - a);
        d = a + invphi * (b - a);
    }
    return std::max(best, abs_derivative(loss, order, 0.5 * (a + b)));
}

}  // namespace

double derivative_sup(LossKind loss, int order)
{
    if (order < 2 || order > kMaxDerivativeOrder)
        throw DomainError("derivative_sup: order must be in 2..4");
    if (loss == LossKind::squared) return order == 2 ? 1.0 : 0.0;

    static std::mutex mutex;
    static std::map<int, double> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, maximize_abs_derivative(loss, order)).first;
    return it->second;
}

Dataset::Dataset(SparseRows rows, Vector offsets, LossKind loss, bool label_folded)
    : rows_(std::move(rows)), offsets_(std::move(offsets)), loss_(loss), label_folded_(label_folded)
{
    if (rows_.rows() < 1) throw DomainError("dataset must contain at least one row");
    rows_.makeCompressed();
    if (offsets_.size() == 0) offsets_ = Vector::Zero(rows_.rows());
    require_dim("dataset offsets", rows_.rows(), offsets_.size());
    if (!rows_.coeffs().allFinite() || !offsets_.allFinite())
        throw DomainError("dataset contains non-finite values");
    row_sq_norms_.resize(rows_.rows());
    for (Index i = 0; i < rows_.rows(); ++i) row_sq_norms_[i] = rows_.row(i).squaredNorm();
}

Dataset dataset_from_dense(const Matrix& rows, LossKind loss, const Vector& offsets)
{
    SparseRows sparse = rows.sparseView();
    return Dataset(std::move(sparse), offsets, loss);
}

Problem::Problem(Dataset d, double l) : data(std::move(d)), lambda(l)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be >= 0");
}

Vector linear_predictor(const Dataset& data, const ConstVectorRef& x)
{
    require_dim("linear_predictor", data.dim(), x.size());
    Vector u = data.rows() * x;
    u -= data.offsets();
    return u;
}

double objective(const Problem& problem, const ConstVectorRef& x)
{
    const Vector u = linear_predictor(problem.data, x);
    double sum = 0.0;
    for (Index i = 0; i < u.size(); ++i) sum += scalar_derivatives(problem.data.loss(), u[i], 0)[0];
    return sum / static_cast<double>(u.size()) + 0.5 * problem.lambda * x.squaredNorm();
}

Vector gradient(const Problem& problem, const ConstVectorRef& x)
{
    const Vector u = linear_predictor(problem.data, x);
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) w[i] = scalar_derivatives(problem.data.loss(), u[i], 1)[1];
    Vector g = problem.data.rows().transpose() * w;
    g /= static_cast<double>(u.size());
    g += problem.lambda * x;
    return g;
}

Matrix hessian(const Problem& problem, const ConstVectorRef& x)
{
    const Vector u = linear_predictor(problem.data, x);
    const Index n = problem.dim();
    Matrix h = Matrix::Zero(n, n);
    for (Index i = 0; i < u.size(); ++i) {
        const double w = scalar_derivatives(problem.data.loss(), u[i], 2)[2];
        for (SparseRows::InnerIterator r(problem.data.rows(), i); r; ++r)
            for (SparseRows::InnerIterator c(problem.data.rows(), i); c; ++c)
                h(r.col(), c.col()) += w * r.value() * c.value();
    }
    h /= static_cast<double>(u.size());
    h.diagonal().array() += problem.lambda;
    return h;
}

namespace {

void check_order(int p)
{
    if (p < 1 || p > 3) throw DomainError("lipschitz_estimate: p out of range (1..3)");
}

}  // namespace

double lipschitz_estimate(const Problem& problem, int p)
{
    check_order(p);
    const double c = derivative_sup(problem.data.loss(), p + 1);
    const Vector& sq = problem.data.row_sq_norms();
    const double mean_pow = sq.array().pow(0.5 * (p + 1)).mean();
    return c * mean_pow;
}

double lipschitz_estimate_max(const Problem& problem, int p)
{
    check_order(p);
    const double c = derivative_sup(problem.data.loss(), p + 1);
    return c * std::pow(problem.data.row_sq_norms().maxCoeff(), 0.5 * (p + 1));
}

}  // namespace shom
