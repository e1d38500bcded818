#pragma once

#include "shom/surrogate.hpp"

#include <cmath>
#include <limits>
#include <string_view>

namespace shom {

/// Unique alpha >= 0 with (c/p!) alpha^p + alpha = r.
///
/// Safeguarded Newton on the increasing convex function
/// psi(alpha) = (c/p!) alpha^p + alpha - r over the bracket [0, r]; a step
/// that leaves the bracket is replaced by bisection.
template <typename T>
T scalar_power_root(T c, int p, T r)
{
    using std::abs;
    using std::pow;
    if (!(c > T(0))) throw DomainError("scalar_power_root: c must be positive");
    if (p < 1) throw DomainError("scalar_power_root: p must be >= 1");
    if (!(r >= T(0))) throw DomainError("scalar_power_root: r must be nonnegative");
    if (r == T(0)) return T(0);

    T fact = 1;
    for (int k = 2; k <= p; ++k) fact *= T(k);
    const T a = c / fact;
    auto psi = [&](T x) { return a * pow(x, p) + x - r; };

    T lo = 0, hi = r;
    // Newton from the right end converges monotonically for convex psi.
    T x = r;
    for (int it = 0; it < 200; ++it) {
        const T f = psi(x);
        if (f > T(0)) hi = x; else lo = x;
        if (abs(f) <= T(1e-15) * (T(1) + r) || hi - lo <= T(4) * std::numeric_limits<T>::epsilon() * hi) break;
        const T df = a * T(p) * pow(x, p - 1) + T(1);
        T next = x - f / df;
        if (!(next > lo && next < hi)) next = T(0.5) * (lo + hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

/// argmin_y c/(p+1)! ||y||^{p+1} + 1/2 ||y - y0||^2 = y0 * alpha/||y0||,
/// where (c/p!) alpha^p + alpha = ||y0||.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> prox_power_norm(
    const Eigen::MatrixBase<Derived>& y0, typename Derived::Scalar c, int p)
{
    using T = typename Derived::Scalar;
    const T r = y0.norm();
    if (r == T(0)) {
        if (!(c > T(0))) throw DomainError("prox_power_norm: c must be positive");
        return Eigen::Matrix<T, Eigen::Dynamic, 1>::Zero(y0.size());
    }
    const T alpha = scalar_power_root(c, p, r);
    return y0 * (alpha / r);
}

enum class InnerMethod {
    newton,              ///< damped Newton with Armijo backtracking
    accelerated_gradient,///< backtracking gradient with Nesterov momentum and restart
    proximal_gradient,   ///< gradient on the smooth part, exact prox of the power term (one anchor)
};

std::string_view to_string(InnerMethod m);
InnerMethod inner_method_from_string(std::string_view name);

struct InnerConfig {
    double grad_tol = 1e-6;
    int max_iters = 500;
    double initial_step = 1.0;
    double shrink = 0.5;
    double sufficient_decrease = 1e-4;
    bool acceleration = true;
    InnerMethod method = InnerMethod::newton;

    void validate() const;
};

struct InnerResult {
    Vector minimizer;
    double final_grad_norm = 0.0;
    int iterations = 0;
    double surrogate_value_at_min = 0.0;
    bool converged = false;
    /// Full passes over the data rows spent by the solver (zero when the
    /// model evaluates through its aggregated moments).
    double data_passes = 0.0;
};

/// Approximately minimizes the surrogate starting from x_init. The returned
/// point never has a larger surrogate value than x_init.
InnerResult minimize_surrogate(const SurrogateModel& model, const ConstVectorRef& x_init,
                               const InnerConfig& cfg);

}  // namespace shom
