#include "shom/surrogate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstring>

namespace shom {

namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0, 120.0};

bool bit_equal(const ConstVectorRef& a, const Vector& b)
{
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void check_order(int p)
{
    if (p < 1 || p > 3) throw DomainError("surrogate order p out of range (1..3)");
}

}  // namespace

// ---------------------------------------------------------------------------
// AnchorState

int AnchorState::insert_point(const ConstVectorRef& x)
{
    // newest records are the likeliest matches
    for (auto it = table_.rbegin(); it != table_.rend(); ++it)
        if (bit_equal(x, it->second.point)) return it->first;
    AnchorRecord rec;
    rec.id = next_id_++;
    rec.point = x;
    rec.sq_norm = rec.point.squaredNorm();
    rec.refcount = 0;
    table_.emplace(rec.id, std::move(rec));
    return next_id_ - 1;
}

void AnchorState::refresh_cache(const Problem& problem, Index j)
{
    const Dataset& data = problem.data;
    const AnchorRecord& rec = table_.at(assignment_[j]);
    double s = 0.0;
    for (auto it = data.row(j); it; ++it) s += it.value() * rec.point[it.col()];
    predictors_[j] = s;
    const auto d = scalar_derivatives(data.loss(), s - data.offsets()[j], order_);
    for (int l = 0; l <= order_; ++l) coefficients_(j, l) = d[l] / kFactorial[l];
}

void AnchorState::check_invariants() const
{
    std::map<int, Index> counts;
    for (int id : assignment_) {
        if (!table_.count(id)) throw Error("anchor assignment points at a missing record");
        ++counts[id];
    }
    Index total = 0;
    for (const auto& [id, rec] : table_) {
        if (rec.refcount < 1) throw Error("anchor record with zero refcount kept in table");
        if (counts[id] != rec.refcount) throw Error("anchor refcount does not match assignment");
        const double sq = rec.point.squaredNorm();
        if (std::abs(sq - rec.sq_norm) > 1e-12 * std::max(1.0, sq))
            throw Error("anchor sq_norm cache is stale");
        total += rec.refcount;
    }
    if (total != size()) throw Error("anchor refcounts do not sum to N");
}

AnchorState init_anchors(const Problem& problem, const ConstVectorRef& x0, int p)
{
    check_order(p);
    require_dim("init_anchors", problem.dim(), x0.size());
    if (!x0.allFinite()) throw DomainError("init_anchors: non-finite starting point");
    AnchorState state;
    state.order_ = p;
    const Index n = problem.size();
    const int id = state.insert_point(x0);
    state.table_.at(id).refcount = n;
    state.assignment_.assign(static_cast<std::size_t>(n), id);
    state.predictors_.resize(n);
    state.coefficients_.resize(n, p + 1);
    for (Index j = 0; j < n; ++j) state.refresh_cache(problem, j);
    return state;
}

void update_anchors(AnchorState& state, const Problem& problem, std::span<const Index> batch,
                    const ConstVectorRef& x_new)
{
    if (batch.empty()) throw DomainError("update_anchors: empty batch");
    require_dim("update_anchors", problem.dim(), x_new.size());
    if (!x_new.allFinite()) throw DomainError("update_anchors: non-finite anchor");
    std::vector<Index> sorted(batch.begin(), batch.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= state.size())
        throw std::out_of_range("update_anchors: batch index out of range");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DomainError("update_anchors: duplicate batch index");

    const int id = state.insert_point(x_new);
    for (Index j : batch) {
        const int old = state.assignment_[j];
        if (old == id) continue;
        state.assignment_[j] = id;
        ++state.table_.at(id).refcount;
        if (--state.table_.at(old).refcount == 0) state.table_.erase(old);
    }
    for (Index j : batch) state.refresh_cache(problem, j);
}

void recompute_caches(AnchorState& state, const Problem& problem)
{
    for (Index j = 0; j < state.size(); ++j) state.refresh_cache(problem, j);
}

// ---------------------------------------------------------------------------
// TaylorMoments

TaylorMoments::TaylorMoments(int order, Index dim) : order_(order), dim_(dim)
{
    reset();
}

void TaylorMoments::reset()
{
    m0_ = 0.0;
    m1_ = Vector::Zero(dim_);
    if (order_ >= 2) m2_ = Matrix::Zero(dim_, dim_);
    if (order_ >= 3) m3_ = Vector::Zero(dim_ * dim_ * dim_);
}

void TaylorMoments::add(const Dataset& data, Index j, double s, std::span<const double> c,
                        double sign)
{
    // Expand sum_l c_l (z - s)^l = sum_m d_m z^m in z = a_j^T y.
    static constexpr double binom[4][4] = {
        {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    double d[4] = {0, 0, 0, 0};
    for (int m = 0; m <= order_; ++m) {
        double pw = 1.0;
        for (int l = m; l <= order_; ++l) {
            d[m] += c[static_cast<std::size_t>(l)] * binom[l][m] * pw;
            pw *= -s;
        }
        d[m] *= sign;
    }
    m0_ += d[0];
    const SparseRows& rows = data.rows();
    const Index n = dim_;
    for (SparseRows::InnerIterator a(rows, j); a; ++a) {
        m1_[a.col()] += d[1] * a.value();
        if (order_ < 2) continue;
        for (SparseRows::InnerIterator b(rows, j); b; ++b) {
            const double ab = a.value() * b.value();
            m2_(a.col(), b.col()) += d[2] * ab;
            if (order_ < 3) continue;
            const double dab = d[3] * ab;
            double* slab = m3_.data() + a.col() + n * b.col();
            for (SparseRows::InnerIterator c3(rows, j); c3; ++c3) slab[n * n * c3.col()] += dab * c3.value();
        }
    }
}

double TaylorMoments::value(const ConstVectorRef& y) const
{
    double v = m0_ + m1_.dot(y);
    if (order_ >= 2) v += y.dot(m2_ * y);
    if (order_ >= 3) {
        const Index n = dim_;
        Eigen::Map<const Matrix> t(m3_.data(), n, n * n);
        const Matrix yy = y * y.transpose();
        const Eigen::Map<const Vector> vec(yy.data(), n * n);
        v += y.dot(t * vec);
    }
    return v;
}

Vector TaylorMoments::gradient(const ConstVectorRef& y) const
{
    Vector g = m1_;
    if (order_ >= 2) g.noalias() += 2.0 * (m2_ * y);
    if (order_ >= 3) {
        const Index n = dim_;
        Eigen::Map<const Matrix> t(m3_.data(), n, n * n);
        const Matrix yy = y * y.transpose();
        const Eigen::Map<const Vector> vec(yy.data(), n * n);
        g.noalias() += 3.0 * (t * vec);
    }
    return g;
}

Matrix TaylorMoments::hessian(const ConstVectorRef& y) const
{
    const Index n = dim_;
    if (order_ < 2) return Matrix::Zero(n, n);
    Matrix h = 2.0 * m2_;
    if (order_ >= 3) {
        Eigen::Map<const Matrix> t(m3_.data(), n * n, n);
        const Vector ty = t * y;
        h += 6.0 * Eigen::Map<const Matrix>(ty.data(), n, n);
    }
    return h;
}

// ---------------------------------------------------------------------------
// SurrogateModel

namespace {

bool want_moments(MomentMode mode, int p, Index n)
{
    switch (mode) {
    case MomentMode::enabled: return true;
    case MomentMode::disabled: return false;
    case MomentMode::automatic: break;
    }
    return p <= 2 ? n <= 2000 : n <= 160;
}

}  // namespace

SurrogateModel::SurrogateModel(const Problem& problem, int p, double mp, const ConstVectorRef& x0,
                               MomentMode moments)
    : problem_(&problem), order_(p), mp_(mp), anchors_(init_anchors(problem, x0, p))
{
    if (!(mp >= 0.0) || !std::isfinite(mp)) throw DomainError("M_p must be a finite value >= 0");
    if (want_moments(moments, p, problem.dim())) {
        moments_ = std::make_unique<TaylorMoments>(p, problem.dim());
        resync_moments();
    }
}

void SurrogateModel::add_moments(std::span<const Index> batch, double sign)
{
    const RowMatrix& coeffs = anchors_.coefficients();
    for (Index j : batch) {
        const std::span<const double> c(coeffs.row(j).data(), static_cast<std::size_t>(order_ + 1));
        moments_->add(problem_->data, j, anchors_.predictors()[j], c, sign);
    }
}

void SurrogateModel::resync_moments()
{
    if (!moments_) return;
    moments_->reset();
    const RowMatrix& coeffs = anchors_.coefficients();
    for (Index j = 0; j < anchors_.size(); ++j) {
        const std::span<const double> c(coeffs.row(j).data(), static_cast<std::size_t>(order_ + 1));
        moments_->add(problem_->data, j, anchors_.predictors()[j], c, 1.0);
    }
    refreshed_since_sync_ = 0;
}

void SurrogateModel::refresh(std::span<const Index> batch, const ConstVectorRef& x_new)
{
    if (!moments_) {
        update_anchors(anchors_, *problem_, batch, x_new);
        return;
    }
    // validate before touching the moments
    for (Index j : batch)
        if (j < 0 || j >= anchors_.size())
            throw std::out_of_range("update_anchors: batch index out of range");
    add_moments(batch, -1.0);
    try {
        update_anchors(anchors_, *problem_, batch, x_new);
    } catch (...) {
        add_moments(batch, 1.0);
        throw;
    }
    add_moments(batch, 1.0);
    // bounds the drift of the incremental sums
    refreshed_since_sync_ += static_cast<Index>(batch.size());
    if (refreshed_since_sync_ >= 50 * anchors_.size()) {
        resync_moments();
        ++resyncs_;
    }
}

double SurrogateModel::taylor_value(const ConstVectorRef& y, bool use_moments) const
{
    const double inv_n = 1.0 / static_cast<double>(anchors_.size());
    if (use_moments && moments_) return moments_->value(y) * inv_n;
    const Vector u = problem_->data.rows() * y - anchors_.predictors();
    const RowMatrix& c = anchors_.coefficients();
    double sum = 0.0;
    for (Index j = 0; j < u.size(); ++j) {
        double acc = c(j, order_);
        for (int l = order_ - 1; l >= 0; --l) acc = acc * u[j] + c(j, l);
        sum += acc;
    }
    return sum * inv_n;
}

Vector SurrogateModel::taylor_gradient(const ConstVectorRef& y, bool use_moments) const
{
    const double inv_n = 1.0 / static_cast<double>(anchors_.size());
    if (use_moments && moments_) return moments_->gradient(y) * inv_n;
    const Vector u = problem_->data.rows() * y - anchors_.predictors();
    const RowMatrix& c = anchors_.coefficients();
    Vector w(u.size());
    for (Index j = 0; j < u.size(); ++j) {
        double acc = order_ * c(j, order_);
        for (int l = order_ - 1; l >= 1; --l) acc = acc * u[j] + l * c(j, l);
        w[j] = acc;
    }
    Vector g = problem_->data.rows().transpose() * w;
    return g * inv_n;
}

Matrix SurrogateModel::taylor_hessian(const ConstVectorRef& y, bool use_moments) const
{
    const Index n = dim();
    const double inv_n = 1.0 / static_cast<double>(anchors_.size());
    if (use_moments && moments_) return moments_->hessian(y) * inv_n;
    Matrix h = Matrix::Zero(n, n);
    if (order_ < 2) return h;
    const Vector u = problem_->data.rows() * y - anchors_.predictors();
    const RowMatrix& c = anchors_.coefficients();
    const SparseRows& rows = problem_->data.rows();
    for (Index j = 0; j < u.size(); ++j) {
        double w = order_ * (order_ - 1) * c(j, order_);
        for (int l = order_ - 1; l >= 2; --l) w = w * u[j] + l * (l - 1) * c(j, l);
        for (SparseRows::InnerIterator a(rows, j); a; ++a)
            for (SparseRows::InnerIterator b(rows, j); b; ++b)
                h(a.col(), b.col()) += w * a.value() * b.value();
    }
    return h * inv_n;
}

double SurrogateModel::regularizer_value(const ConstVectorRef& y) const
{
    double sum = 0.0;
    for (const auto& [id, rec] : anchors_.table()) {
        // direct difference: expanding the square cancels when y is near the anchor
        const double dsq = (y - rec.point).squaredNorm();
        const double pw = order_ == 1 ? dsq : order_ == 2 ? dsq * std::sqrt(dsq) : dsq * dsq;
        sum += static_cast<double>(rec.refcount) * pw;
    }
    return mp_ / kFactorial[order_ + 1] * sum / static_cast<double>(anchors_.size());
}

Vector SurrogateModel::regularizer_gradient(const ConstVectorRef& y) const
{
    Vector g = Vector::Zero(dim());
    for (const auto& [id, rec] : anchors_.table()) {
        const Vector d = y - rec.point;
        const double scale = order_ == 1 ? 1.0 : order_ == 2 ? d.norm() : d.squaredNorm();
        g += (static_cast<double>(rec.refcount) * scale) * d;
    }
    return g * (mp_ / kFactorial[order_] / static_cast<double>(anchors_.size()));
}

Matrix SurrogateModel::regularizer_hessian(const ConstVectorRef& y) const
{
    const Index n = dim();
    const double coef = mp_ / kFactorial[order_] / static_cast<double>(anchors_.size());
    if (order_ == 1) return Matrix::Identity(n, n) * (coef * static_cast<double>(anchors_.size()));

    // sum_a w_a (||d||^{p-1} I + (p-1) ||d||^{p-3} d d^T)
    const Index k = anchors_.distinct();
    Matrix outer(n, k);
    double diag = 0.0;
    Index col = 0;
    for (const auto& [id, rec] : anchors_.table()) {
        const Vector d = y - rec.point;
        const double r = d.norm();
        const double w = static_cast<double>(rec.refcount);
        diag += w * std::pow(r, order_ - 1);
        // (p-1) r^{p-3} d d^T = (sqrt((p-1) r^{p-3}) d)(...)^T, zero at d = 0
        const double s = r > 0.0 ? std::sqrt(w * (order_ - 1) * std::pow(r, order_ - 3)) : 0.0;
        outer.col(col++) = s * d;
    }
    Matrix h = Matrix::Zero(n, n);
    h.selfadjointView<Eigen::Lower>().rankUpdate(outer);
    h = h.selfadjointView<Eigen::Lower>();
    h.diagonal().array() += diag;
    return h * coef;
}

double SurrogateModel::value(const ConstVectorRef& y) const
{
    require_dim("surrogate_value", dim(), y.size());
    return taylor_value(y, false) + regularizer_value(y) + 0.5 * lambda() * y.squaredNorm();
}

Vector SurrogateModel::gradient(const ConstVectorRef& y) const
{
    require_dim("surrogate_gradient", dim(), y.size());
    Vector g = taylor_gradient(y, false) + regularizer_gradient(y);
    g += lambda() * y;
    return g;
}

Matrix SurrogateModel::hessian(const ConstVectorRef& y) const
{
    require_dim("surrogate_hessian", dim(), y.size());
    Matrix h = taylor_hessian(y, false) + regularizer_hessian(y);
    h.diagonal().array() += lambda();
    return h;
}

double SurrogateModel::fast_value(const ConstVectorRef& y) const
{
    require_dim("surrogate_value", dim(), y.size());
    return taylor_value(y, true) + regularizer_value(y) + 0.5 * lambda() * y.squaredNorm();
}

Vector SurrogateModel::fast_gradient(const ConstVectorRef& y) const
{
    require_dim("surrogate_gradient", dim(), y.size());
    Vector g = taylor_gradient(y, true) + regularizer_gradient(y);
    g += lambda() * y;
    return g;
}

Matrix SurrogateModel::fast_hessian(const ConstVectorRef& y) const
{
    require_dim("surrogate_hessian", dim(), y.size());
    Matrix h = taylor_hessian(y, true) + regularizer_hessian(y);
    h.diagonal().array() += lambda();
    return h;
}

double surrogate_value(const SurrogateModel& model, const ConstVectorRef& y)
{
    return model.value(y);
}

Vector surrogate_gradient(const SurrogateModel& model, const ConstVectorRef& y)
{
    return model.gradient(y);
}

double default_mp(const Problem& problem, int p)
{
    const double l = lipschitz_estimate(problem, p);
    return p == 1 ? l : p * l;
}

double error_value(const ErrorView& view, const ConstVectorRef& y)
{
    return view.model.value(y) - objective(view.model.problem(), y);
}

Vector error_gradient(const ErrorView& view, const ConstVectorRef& y)
{
    return view.model.gradient(y) - gradient(view.model.problem(), y);
}

}  // namespace shom
