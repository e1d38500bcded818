#pragma once

// Stochastic p-th order surrogate of a GLM finite sum.
//
// Function j keeps its own anchor x^j and the surrogate
//
//   g_j(y) = sum_{l=0..p} c_{j,l} (a_j^T y - s_j)^l
//            + M/(p+1)! ||y - x^j||^{p+1} + (lambda/2) ||y||^2,
//
// where s_j = a_j^T x^j and c_{j,l} = phi^(l)(s_j - b_j) / l!. The anchors
// are stored once per distinct point with a reference count; only the
// scalars (s_j, c_{j,.}) are kept per function.

#include "shom/glm.hpp"

#include <limits>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace shom {

struct AnchorRecord {
    int id = 0;
    Vector point;
    double sq_norm = 0.0;
    Index refcount = 0;
    /// f(point) when known, NaN otherwise. Filled lazily by the driver.
    double objective = std::numeric_limits<double>::quiet_NaN();
};

class AnchorState {
public:
    AnchorState() = default;

    int order() const { return order_; }
    Index size() const { return static_cast<Index>(assignment_.size()); }
    Index distinct() const { return static_cast<Index>(table_.size()); }

    /// Records keyed by id; ids grow monotonically so iteration order is
    /// creation order.
    const std::map<int, AnchorRecord>& table() const { return table_; }
    const std::vector<int>& assignment() const { return assignment_; }
    const AnchorRecord& anchor_of(Index j) const { return table_.at(assignment_[j]); }
    AnchorRecord& record(int id) { return table_.at(id); }

    /// s_j = a_j^T x^j.
    const Vector& predictors() const { return predictors_; }
    /// Row j holds phi^(l)(s_j - b_j) / l! for l = 0..p.
    const RowMatrix& coefficients() const { return coefficients_; }

    /// Throws if refcounts, assignment targets or the sq_norm caches are
    /// inconsistent.
    void check_invariants() const;

private:
    friend AnchorState init_anchors(const Problem&, const ConstVectorRef&, int);
    friend void update_anchors(AnchorState&, const Problem&, std::span<const Index>,
                               const ConstVectorRef&);
    friend void recompute_caches(AnchorState&, const Problem&);

    int insert_point(const ConstVectorRef& x);
    void refresh_cache(const Problem& problem, Index j);

    int order_ = 0;
    int next_id_ = 0;
    std::map<int, AnchorRecord> table_;
    std::vector<int> assignment_;
    Vector predictors_;
    RowMatrix coefficients_;
};

/// Every function anchored at x0 (one record with refcount N).
AnchorState init_anchors(const Problem& problem, const ConstVectorRef& x0, int p);

/// Re-anchors the (0-based, distinct) indices in `batch` at x_new. A record
/// bit-equal to x_new is reused; records whose refcount drops to zero are
/// removed.
void update_anchors(AnchorState& state, const Problem& problem, std::span<const Index> batch,
                    const ConstVectorRef& x_new);

/// Recomputes every per-function cache from its assigned anchor.
void recompute_caches(AnchorState& state, const Problem& problem);

/// Aggregated polynomial form of the Taylor part,
///   sum_j sum_l c_{j,l} (a_j^T y - s_j)^l = m0 + m1.y + y'M2 y + M3[y,y,y],
/// maintained incrementally as functions are re-anchored. M3 is stored as a
/// dense n^3 array, so third order is only enabled for small n.
class TaylorMoments {
public:
    TaylorMoments(int order, Index dim);

    void add(const Dataset& data, Index j, double s, std::span<const double> coeffs, double sign);
    void reset();

    double value(const ConstVectorRef& y) const;
    Vector gradient(const ConstVectorRef& y) const;
    Matrix hessian(const ConstVectorRef& y) const;

private:
    int order_;
    Index dim_;
    double m0_ = 0.0;
    Vector m1_;
    Matrix m2_;
    Vector m3_;  // column-major n x n x n
};

enum class MomentMode { automatic, enabled, disabled };

class SurrogateModel {
public:
    SurrogateModel(const Problem& problem, int p, double mp, const ConstVectorRef& x0,
                   MomentMode moments = MomentMode::automatic);

    const Problem& problem() const { return *problem_; }
    int order() const { return order_; }
    double mp() const { return mp_; }
    double lambda() const { return problem_->lambda; }
    Index dim() const { return problem_->dim(); }

    const AnchorState& anchors() const { return anchors_; }
    AnchorState& anchors() { return anchors_; }

    /// update_anchors() plus incremental maintenance of the moments.
    void refresh(std::span<const Index> batch, const ConstVectorRef& x_new);

    // Reference evaluation: one pass over the rows plus one over the
    // distinct anchors.
    double value(const ConstVectorRef& y) const;
    Vector gradient(const ConstVectorRef& y) const;
    Matrix hessian(const ConstVectorRef& y) const;

    // Data term (Taylor polynomials, 1/N-averaged), from rows or moments.
    double taylor_value(const ConstVectorRef& y, bool use_moments) const;
    Vector taylor_gradient(const ConstVectorRef& y, bool use_moments) const;
    Matrix taylor_hessian(const ConstVectorRef& y, bool use_moments) const;

    // M/(p+1)! (1/N) sum_j ||y - x^j||^{p+1}
    double regularizer_value(const ConstVectorRef& y) const;
    Vector regularizer_gradient(const ConstVectorRef& y) const;
    Matrix regularizer_hessian(const ConstVectorRef& y) const;

    bool has_moments() const { return moments_ != nullptr; }

    // Evaluation used by the inner solvers: moments when available.
    double fast_value(const ConstVectorRef& y) const;
    Vector fast_gradient(const ConstVectorRef& y) const;
    Matrix fast_hessian(const ConstVectorRef& y) const;

    /// Rebuilds the moments from the per-function caches.
    void resync_moments();
    /// Resyncs triggered by refresh(); each one is a full pass over the rows.
    long resyncs() const { return resyncs_; }

private:
    void add_moments(std::span<const Index> batch, double sign);

    const Problem* problem_;
    int order_;
    double mp_;
    AnchorState anchors_;
    std::unique_ptr<TaylorMoments> moments_;
    Index refreshed_since_sync_ = 0;
    long resyncs_ = 0;
};

double surrogate_value(const SurrogateModel& model, const ConstVectorRef& y);
Vector surrogate_gradient(const SurrogateModel& model, const ConstVectorRef& y);

/// Default M_p: p * L_p for p >= 2 (convex surrogate) and L_1 for p = 1.
double default_mp(const Problem& problem, int p);

/// h(y) = g(y) - f(y).
struct ErrorView {
    const SurrogateModel& model;
};

double error_value(const ErrorView& view, const ConstVectorRef& y);
Vector error_gradient(const ErrorView& view, const ConstVectorRef& y);

}  // namespace shom
