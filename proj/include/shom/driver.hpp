#pragma once

// Outer SHOM loop, the minibatch SGD baseline and the Lyapunov quantities
// used to monitor local convergence.

#include "shom/subproblem.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace shom {

/// Uniform tau-subsets of {0..N-1} without replacement (partial
/// Fisher-Yates over a persistent permutation). Indices come back sorted.
class MinibatchSampler {
public:
    MinibatchSampler(Index n, Index tau, std::uint64_t seed);

    std::vector<Index> sample();

    Index population() const { return static_cast<Index>(perm_.size()); }
    Index tau() const { return tau_; }

private:
    std::vector<Index> perm_;
    Index tau_;
    std::mt19937_64 rng_;
};

std::vector<Index> sample_minibatch(MinibatchSampler& sampler);

struct Reference {
    Vector x_star;
    double f_star = 0.0;
    double grad_norm = 0.0;
};

enum class Method { shom, sgd };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct SolverConfig {
    Method method = Method::shom;
    int p = 2;
    int q = 2;
    Index tau = 1;
    /// M_p; default_mp() when empty.
    std::optional<double> mp;
    /// Regularization used when the problem is built from this config.
    double lambda = 1e-3;
    std::uint64_t seed = 0;

    int outer_iters = 100;
    double epochs = std::numeric_limits<double>::infinity();
    /// Stop once f(x_k) - f* <= target_gap (needs a reference).
    double target_gap = 0.0;

    InnerConfig inner;
    /// Inner tolerance at step k: max(floor, min(inner.grad_tol, factor * ||grad g(x_k)||)).
    double inner_tol_factor = 0.1;
    double inner_tol_floor = 1e-14;
    MomentMode moments = MomentMode::automatic;

    bool record_lyapunov = false;
    std::optional<Reference> reference;
    /// Starting point; the origin when empty.
    Vector x0;
    /// Record every trace_every-th iteration (the last one is always kept).
    int trace_every = 1;
    bool record_time = true;
    std::string run_id = "run";

    double sgd_gamma0 = 0.1;
    double sgd_k0 = 100.0;

    /// Throws DomainError naming the offending field.
    void validate(Index n_functions) const;
};

struct TraceRow {
    std::string run_id;
    long k = 0;
    double f = 0.0;
    double grad_norm = 0.0;
    /// g(x_{k+1}; x^_k); NaN on the last row and for SGD.
    double surrogate_value = std::numeric_limits<double>::quiet_NaN();
    double phi = std::numeric_limits<double>::quiet_NaN();
    double W = std::numeric_limits<double>::quiet_NaN();
    /// ||x_k - x*|| when a reference is set.
    double dist = std::numeric_limits<double>::quiet_NaN();
    double epochs = 0.0;
    double seconds = 0.0;
    long distinct_anchors = 0;
    /// 1/0 for the inner solve started at x_k, -1 when not applicable.
    int inner_converged = -1;
};

struct RunTrace {
    std::string run_id;
    std::vector<TraceRow> rows;
    bool aborted = false;
    std::string status = "ok";
    Vector final_x;
};

RunTrace run_shom(const Problem& problem, const SolverConfig& cfg);
RunTrace run_sgd(const Problem& problem, const SolverConfig& cfg);
/// Dispatches on cfg.method.
RunTrace run(const Problem& problem, const SolverConfig& cfg);

/// (1/N) sum_j (f(x^j) - f*)^{(p+1)/q}, grouped by distinct anchor. Uses
/// AnchorRecord::objective when set.
double lyapunov_phi(const AnchorState& anchors, const Problem& problem, double f_star, int p, int q);

/// (1/N) sum_j ||x^j - x*||^{p+1}.
double lyapunov_W(const AnchorState& anchors, const ConstVectorRef& x_star, int p);

}  // namespace shom
