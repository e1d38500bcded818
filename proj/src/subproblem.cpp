#include "shom/subproblem.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>

namespace shom {

std::string_view to_string(InnerMethod m)
{
    switch (m) {
    case InnerMethod::newton: return "newton";
    case InnerMethod::accelerated_gradient: return "gradient";
    case InnerMethod::proximal_gradient: return "prox-gradient";
    }
    return "?";
}

InnerMethod inner_method_from_string(std::string_view name)
{
    if (name == "newton") return InnerMethod::newton;
    if (name == "gradient") return InnerMethod::accelerated_gradient;
    if (name == "prox-gradient") return InnerMethod::proximal_gradient;
    throw DomainError("unknown inner method '" + std::string(name) + "'");
}

void InnerConfig::validate() const
{
    if (!(grad_tol > 0.0)) throw DomainError("inner grad_tol must be positive");
    if (max_iters < 1) throw DomainError("inner max_iters must be >= 1");
    if (!(initial_step > 0.0)) throw DomainError("inner initial_step must be positive");
    if (!(shrink > 0.0 && shrink < 1.0)) throw DomainError("inner shrink must be in (0,1)");
    if (!(sufficient_decrease > 0.0 && sufficient_decrease < 0.5))
        throw DomainError("inner sufficient_decrease must be in (0,1/2)");
}

namespace {

/// Counts data passes of the model's evaluation path.
class Oracle {
public:
    explicit Oracle(const SurrogateModel& m) : model_(m), cost_(m.has_moments() ? 0.0 : 1.0) {}

    double value(const ConstVectorRef& y)
    {
        passes_ += cost_;
        const double v = model_.fast_value(y);
        if (!std::isfinite(v)) throw DomainError("surrogate value is not finite");
        return v;
    }
    Vector gradient(const ConstVectorRef& y)
    {
        passes_ += cost_;
        return model_.fast_gradient(y);
    }
    Matrix hessian(const ConstVectorRef& y)
    {
        passes_ += cost_;
        return model_.fast_hessian(y);
    }
    // smooth part for the proximal variant: Taylor terms + lambda/2 ||y||^2
    double smooth_value(const ConstVectorRef& y)
    {
        passes_ += cost_;
        return model_.taylor_value(y, true) + 0.5 * model_.lambda() * y.squaredNorm();
    }
    Vector smooth_gradient(const ConstVectorRef& y)
    {
        passes_ += cost_;
        Vector g = model_.taylor_gradient(y, true);
        g += model_.lambda() * y;
        return g;
    }
    double passes() const { return passes_; }

private:
    const SurrogateModel& model_;
    double cost_;
    double passes_ = 0.0;
};

double rounding_noise(double v)
{
    return 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(v));
}

void finish(InnerResult& res, Oracle& oracle, const Vector& y, double v, const Vector& g,
            double tol)
{
    res.minimizer = y;
    res.surrogate_value_at_min = v;
    res.final_grad_norm = g.norm();
    res.converged = res.final_grad_norm <= tol;
    res.data_passes = oracle.passes();
}

// Newton step, shifting the Hessian by a growing multiple of I until it
// factors and yields a descent direction.
Vector newton_direction(const Matrix& h, const Vector& g)
{
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    double shift = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        Matrix shifted = h;
        shifted.diagonal().array() += shift;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) {
            Vector d = llt.solve(-g);
            if (d.allFinite() && g.dot(d) < 0.0) return d;
        }
        shift = shift == 0.0 ? 1e-12 * scale : shift * 10.0;
    }
    return -g;
}

InnerResult solve_newton(const SurrogateModel& model, const ConstVectorRef& x_init,
                         const InnerConfig& cfg)
{
    Oracle oracle(model);
    InnerResult res;
    Vector y = x_init;
    double v = oracle.value(y);
    Vector g = oracle.gradient(y);
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        const double gn = g.norm();
        if (gn <= cfg.grad_tol) break;
        const Vector d = newton_direction(oracle.hessian(y), g);
        const double slope = g.dot(d);
        // predicted decrease below the rounding noise of v: Armijo is blind
        const double noise = rounding_noise(v);
        const bool at_floor = -slope <= noise;
        double t = 1.0;
        Vector trial = y + d;
        double vt = oracle.value(trial);
        bool armijo = !at_floor && vt <= v + cfg.sufficient_decrease * t * slope;
        if (!armijo && vt <= v + noise) {
            // the value change is rounding noise: decide on the gradient
            Vector gt = oracle.gradient(trial);
            if (gt.norm() >= gn) break;
            y = std::move(trial);
            v = vt;
            g = std::move(gt);
            continue;
        }
        while (!armijo && t > 1e-12) {
            t *= cfg.shrink;
            trial = y + t * d;
            vt = oracle.value(trial);
            armijo = vt <= v + cfg.sufficient_decrease * t * slope;
        }
        if (!armijo) break;
        y = std::move(trial);
        v = vt;
        g = oracle.gradient(y);
    }
    res.iterations = it;
    finish(res, oracle, y, v, g, cfg.grad_tol);
    return res;
}

InnerResult solve_accelerated(const SurrogateModel& model, const ConstVectorRef& x_init,
                              const InnerConfig& cfg)
{
    Oracle oracle(model);
    InnerResult res;
    Vector x = x_init;
    double vx = oracle.value(x);
    Vector gx = oracle.gradient(x);
    Vector z = x;
    double vz = vx;
    Vector gz = gx;
    double lip = 1.0 / cfg.initial_step;
    double t = 1.0;
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        if (gx.norm() <= cfg.grad_tol) break;
        Vector next;
        double vn = 0.0;
        for (int bt = 0; bt < 100; ++bt) {
            next = z - gz / lip;
            vn = oracle.value(next);
            const Vector step = next - z;
            if (vn <= vz + gz.dot(step) + 0.5 * lip * step.squaredNorm() + rounding_noise(vz)) break;
            lip /= cfg.shrink;
        }
        if (vn > vx + rounding_noise(vx)) {
            // restart from the last accepted point
            if (t == 1.0 && z == x) break;
            t = 1.0;
            z = x;
            vz = vx;
            gz = gx;
            continue;
        }
        const Vector prev = x;
        x = next;
        vx = vn;
        gx = oracle.gradient(x);
        if (cfg.acceleration) {
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            z = x + ((t - 1.0) / tn) * (x - prev);
            t = tn;
            vz = oracle.value(z);
            gz = oracle.gradient(z);
        } else {
            z = x;
            vz = vx;
            gz = gx;
        }
        lip *= 0.9;
    }
    res.iterations = it;
    finish(res, oracle, x, vx, gx, cfg.grad_tol);
    return res;
}

InnerResult solve_proximal(const SurrogateModel& model, const ConstVectorRef& x_init,
                           const InnerConfig& cfg)
{
    if (model.anchors().distinct() != 1)
        throw DomainError("proximal-gradient inner solver requires a single shared anchor");
    const Vector center = model.anchors().table().begin()->second.point;
    const int p = model.order();
    const double mp = model.mp();

    Oracle oracle(model);
    InnerResult res;
    Vector y = x_init;
    double sy = oracle.smooth_value(y);
    Vector gs = oracle.smooth_gradient(y);
    Vector g = gs + model.regularizer_gradient(y);
    double lip = 1.0 / cfg.initial_step;
    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        if (g.norm() <= cfg.grad_tol) break;
        Vector next;
        double sn = 0.0;
        for (int bt = 0; bt < 100; ++bt) {
            const Vector shifted = y - gs / lip - center;
            next = mp > 0.0 ? Vector(center + prox_power_norm(shifted, mp / lip, p))
                            : Vector(center + shifted);
            sn = oracle.smooth_value(next);
            const Vector step = next - y;
            if (sn <= sy + gs.dot(step) + 0.5 * lip * step.squaredNorm() + rounding_noise(sy)) break;
            lip /= cfg.shrink;
        }
        const double vy = sy + model.regularizer_value(y);
        if (sn + model.regularizer_value(next) > vy + rounding_noise(vy)) break;
        y = std::move(next);
        sy = sn;
        gs = oracle.smooth_gradient(y);
        g = gs + model.regularizer_gradient(y);
        lip *= 0.9;
    }
    res.iterations = it;
    finish(res, oracle, y, sy + model.regularizer_value(y), g, cfg.grad_tol);
    return res;
}

}  // namespace

InnerResult minimize_surrogate(const SurrogateModel& model, const ConstVectorRef& x_init,
                               const InnerConfig& cfg)
{
    cfg.validate();
    require_dim("minimize_surrogate", model.dim(), x_init.size());
    if (!x_init.allFinite()) throw DomainError("minimize_surrogate: non-finite starting point");
    switch (cfg.method) {
    case InnerMethod::newton: return solve_newton(model, x_init, cfg);
    case InnerMethod::accelerated_gradient: return solve_accelerated(model, x_init, cfg);
    case InnerMethod::proximal_gradient: return solve_proximal(model, x_init, cfg);
    }
    throw DomainError("unknown inner method");
}

}  // namespace shom
