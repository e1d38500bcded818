#pragma once

// Independent oracles and property checks: reference solutions, synthetic
// instances, finite differences, surrogate-definition checks and empirical
// contraction rates.

#include "shom/driver.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace shom {

// --- synthetic instances ----------------------------------------------------

enum class SyntheticKind { quadratic, power_norm, logistic };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::logistic;
    Index n = 5;
    Index N = 20;
    double lambda = 1e-2;
    /// Row scale (logistic) or spread of the spectrum (quadratic).
    double scale = 1.0;
    /// Degree of the power_norm instance.
    double q = 2.0;
    std::uint64_t seed = 1;
};

/// Logistic instances fold random +-1 labels into Gaussian rows; quadratic
/// instances use the squared loss with Gaussian rows and random offsets.
Problem make_problem(const SyntheticSpec& spec);

/// Closed-form minimizer of a squared-loss problem:
/// (A^T A / N + lambda I) x = A^T b / N.
Vector quadratic_solution(const Problem& problem);

/// f(x) = (1/q) ||x - center||^q, uniformly convex of degree q with
/// sigma_q = (1/2)^{q-2}.
struct PowerNormFunction {
    Vector center;
    double q = 2.0;

    double value(const ConstVectorRef& x) const;
    Vector gradient(const ConstVectorRef& x) const;
    double sigma() const { return std::pow(0.5, q - 2.0); }
};

/// LIBSVM text shaped like the first rows of a8a: 14 one-hot attribute
/// groups over 122 binary features, +-1 labels.
void write_a8a_like(std::ostream& out, Index rows, std::uint64_t seed);
/// LIBSVM text shaped like madelon: 2000 rows of 500 dense integer features.
void write_madelon_like(std::ostream& out, Index rows, std::uint64_t seed);

// --- reference solution -----------------------------------------------------

/// Damped Newton on f until ||grad f|| <= tol. Throws ConvergenceError with
/// "no bounded minimizer" when the iterates diverge.
Reference reference_solution(const Problem& problem, double tol = 1e-12, int max_iters = 200);

// --- finite differences -----------------------------------------------------

using ValueFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

/// Max over sampled points of ||g - g_fd|| / (1 + ||g||) with central
/// differences of step 1e-6 (1 + ||x||). Points are center + radius * N(0,I).
double finite_difference_check(const ValueFn& value, const GradientFn& grad, const Vector& center,
                               double radius, int points, std::uint64_t seed);

// --- reports ----------------------------------------------------------------

struct ReportEntry {
    std::string check;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerificationReport {
    std::vector<ReportEntry> entries;

    void add(ReportEntry e) { entries.push_back(std::move(e)); }
    bool all_pass() const;
};

// --- surrogate definition ---------------------------------------------------

struct SurrogateCheckOptions {
    int samples = 1000;
    std::uint64_t seed = 7;
    /// Sample radii are log-uniform in [min_radius, max_radius] around an anchor.
    double min_radius = 1e-3;
    double max_radius = 10.0;
    double majorization_tol = 1e-10;
    double anchor_tol = 1e-9;
    /// Also search the directions of individual rows on a radius grid.
    bool adversarial = true;
    /// Constant used in the residual bound; lipschitz_estimate(p) when <= 0.
    double lipschitz = 0.0;
};

struct SurrogateCheck {
    bool majorization = true;
    double worst_error = 0.0;  ///< min h over samples
    Vector witness;            ///< argmin h when majorization fails
    bool residual_bound = true;
    double worst_residual_excess = 0.0;
    bool anchor_conditions = true;  ///< h, grad h (and FD Hessian for p >= 2) vanish
    double anchor_value = 0.0;
    double anchor_gradient = 0.0;
    double anchor_hessian = 0.0;
    bool anchor_checked = false;  ///< false when no point is shared by every function

    bool pass() const { return majorization && residual_bound && anchor_conditions; }
    void append_to(VerificationReport& report, const std::string& prefix) const;
};

SurrogateCheck check_surrogate_definition(const Problem& problem, const SurrogateModel& model,
                                          const SurrogateCheckOptions& options = {});

// --- rates ------------------------------------------------------------------

struct RateReport {
    double factor = 0.0;      ///< mean per-iteration contraction over seeds
    double stderr_ = 0.0;     ///< standard error of the mean
    double ci_low = 0.0;
    double ci_high = 0.0;
    double bound = 0.0;       ///< 1 - (1 - alpha) tau / N
    double slack_sigmas = 3.0;
    bool pass = false;
    int seeds = 0;
    long window_begin = 0;
    long window_end = 0;
    std::string warning;
};

/// Fits log(series_k) by least squares over [begin, end) for every series
/// (one per seed); the factor is exp(slope). The window is cut where a
/// series falls below `floor`.
RateReport fit_contraction(const std::vector<std::vector<double>>& series, long begin, long end,
                           double bound, double floor = 1e-300, double slack_sigmas = 3.0);

struct ContractionReports {
    RateReport phi;
    RateReport W;
    std::vector<RunTrace> traces;
};

/// Runs SHOM for `seeds` seeds (cfg.seed, cfg.seed+1, ...) from cfg.x0 with
/// Lyapunov tracking and fits both phi_k and W_k.
ContractionReports estimate_contraction(const Problem& problem, SolverConfig cfg,
                                        const Reference& reference, int seeds, long begin, long end,
                                        double alpha = 0.5, double slack_sigmas = 3.0);

/// Point on the segment from x* towards the origin (scaled) with
/// f(x0) - f* <= fraction (f(0) - f*).
Vector warm_start(const Problem& problem, const Reference& reference, double fraction);

/// Checks (sigma/q)||x_{k+1}-x*||^q <= f(x_{k+1})-f* <= Lh/(p+1)! W_k + tol
/// along a trace recorded every iteration with Lyapunov values.
ReportEntry check_lyapunov_sandwich(const RunTrace& trace, const Reference& reference, double sigma,
                                 double q, double lh, int p, double tol);

/// Ratios (f_{k+1}-f*)/(f_k-f*)^{expo} over consecutive rows with f_k-f* above floor.
std::vector<double> superlinear_ratios(const RunTrace& trace, double f_star, double expo,
                                       double floor);

// --- brute force ------------------------------------------------------------

/// Grid search over the box center +- radius (n <= 2) followed by compass
/// search polishing.
Vector brute_force_minimize(const ValueFn& fn, const Vector& center, double radius, int grid = 201);

}  // namespace shom
