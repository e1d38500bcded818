#include "shom/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace shom {

MinibatchSampler::MinibatchSampler(Index n, Index tau, std::uint64_t seed) : tau_(tau), rng_(seed)
{
    if (n < 1) throw DomainError("sampler: population must be >= 1");
    if (tau < 1 || tau > n) throw DomainError("tau out of range");
    perm_.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm_[static_cast<std::size_t>(i)] = i;
}

std::vector<Index> MinibatchSampler::sample()
{
    const std::size_t n = perm_.size();
    const auto tau = static_cast<std::size_t>(tau_);
    if (tau < n) {
        for (std::size_t i = 0; i < tau; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(perm_[i], perm_[pick(rng_)]);
        }
    }
    std::vector<Index> out(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(tau));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Index> sample_minibatch(MinibatchSampler& sampler)
{
    return sampler.sample();
}

std::string_view to_string(Method m)
{
    return m == Method::shom ? "shom" : "sgd";
}

Method method_from_string(std::string_view name)
{
    if (name == "shom") return Method::shom;
    if (name == "sgd") return Method::sgd;
    throw DomainError("unknown method '" + std::string(name) + "'");
}

void SolverConfig::validate(Index n_functions) const
{
    if (p < 1 || p > 3) throw DomainError("p out of range");
    if (q < 2) throw DomainError("q out of range");
    if (tau < 1 || tau > n_functions) throw DomainError("tau out of range");
    if (mp && !(*mp >= 0.0 && std::isfinite(*mp))) throw DomainError("mp out of range");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("lambda out of range");
    if (outer_iters < 0) throw DomainError("outer_iters out of range");
    if (!(epochs > 0.0)) throw DomainError("epochs out of range");
    if (!(target_gap >= 0.0)) throw DomainError("target_gap out of range");
    if (target_gap > 0.0 && !reference) throw DomainError("target_gap requires a reference");
    if (record_lyapunov && !reference) throw DomainError("record_lyapunov requires a reference");
    if (trace_every < 1) throw DomainError("trace_every out of range");
    if (!(inner_tol_factor > 0.0)) throw DomainError("inner_tol_factor out of range");
    if (!(sgd_gamma0 > 0.0)) throw DomainError("sgd_gamma0 out of range");
    if (!(sgd_k0 > 0.0)) throw DomainError("sgd_k0 out of range");
    inner.validate();
}

double lyapunov_phi(const AnchorState& anchors, const Problem& problem, double f_star, int p, int q)
{
    const double expo = static_cast<double>(p + 1) / q;
    double sum = 0.0;
    for (const auto& [id, rec] : anchors.table()) {
        const double f = std::isnan(rec.objective) ? objective(problem, rec.point) : rec.objective;
        double gap = f - f_star;
        if (gap < -1e-9) throw DomainError("lyapunov_phi: f_star lies above an anchor value (bad reference)");
        gap = std::max(gap, 0.0);
        sum += static_cast<double>(rec.refcount) * std::pow(gap, expo);
    }
    return sum / static_cast<double>(anchors.size());
}

double lyapunov_W(const AnchorState& anchors, const ConstVectorRef& x_star, int p)
{
    double sum = 0.0;
    for (const auto& [id, rec] : anchors.table()) {
        require_dim("lyapunov_W", rec.point.size(), x_star.size());
        sum += static_cast<double>(rec.refcount) * std::pow((rec.point - x_star).norm(), p + 1);
    }
    return sum / static_cast<double>(anchors.size());
}

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
public:
    void start() { begin_ = Clock::now(); }
    void stop() { total_ += std::chrono::duration<double>(Clock::now() - begin_).count(); }
    double seconds() const { return total_; }

private:
    Clock::time_point begin_;
    double total_ = 0.0;
};

Vector starting_point(const Problem& problem, const SolverConfig& cfg)
{
    if (cfg.x0.size() == 0) return Vector::Zero(problem.dim());
    require_dim("starting point", problem.dim(), cfg.x0.size());
    return cfg.x0;
}

}  // namespace

RunTrace run_shom(const Problem& problem, const SolverConfig& cfg)
{
    cfg.validate(problem.size());
    const double n_rows = static_cast<double>(problem.size());
    const double mp = cfg.mp ? *cfg.mp : default_mp(problem, cfg.p);

    RunTrace trace;
    trace.run_id = cfg.run_id;
    Stopwatch watch;
    watch.start();

    Vector x = starting_point(problem, cfg);
    SurrogateModel model(problem, cfg.p, mp, x, cfg.moments);
    MinibatchSampler sampler(problem.size(), cfg.tau, cfg.seed);
    double epochs = 1.0;  // every surrogate built at x0
    watch.stop();

    const bool need_gap = cfg.target_gap > 0.0;
    for (long k = 0;; ++k) {
        const bool last = k >= cfg.outer_iters || epochs >= cfg.epochs;
        const bool record = last || k % cfg.trace_every == 0;

        double fk = std::numeric_limits<double>::quiet_NaN();
        if (record || need_gap) {
            fk = objective(problem, x);
            if (!std::isfinite(fk)) {
                trace.aborted = true;
                trace.status = "aborted: non-finite objective at iteration " + std::to_string(k);
                break;
            }
        }
        const bool reached = need_gap && fk - cfg.reference->f_star <= cfg.target_gap;

        TraceRow row;
        if (record || reached) {
            row.run_id = cfg.run_id;
            row.k = k;
            row.f = fk;
            row.grad_norm = gradient(problem, x).norm();
            row.epochs = epochs;
            row.seconds = cfg.record_time ? watch.seconds() : 0.0;
            row.distinct_anchors = static_cast<long>(model.anchors().distinct());
            if (cfg.reference) row.dist = (x - cfg.reference->x_star).norm();
            if (cfg.record_lyapunov) {
                for (const auto& [id, rec] : model.anchors().table())
                    if (std::isnan(rec.objective))
                        model.anchors().record(id).objective = objective(problem, rec.point);
                row.phi = lyapunov_phi(model.anchors(), problem, cfg.reference->f_star, cfg.p, cfg.q);
                row.W = lyapunov_W(model.anchors(), cfg.reference->x_star, cfg.p);
            }
        }
        if (last || reached) {
            trace.rows.push_back(std::move(row));
            break;
        }

        watch.start();
        const Vector gk = model.fast_gradient(x);
        InnerConfig inner = cfg.inner;
        inner.grad_tol =
            std::max(cfg.inner_tol_floor, std::min(cfg.inner.grad_tol, cfg.inner_tol_factor * gk.norm()));
        InnerResult res = minimize_surrogate(model, x, inner);
        epochs += res.data_passes + (model.has_moments() ? 0.0 : 1.0);
        watch.stop();

        if (record) {
            row.surrogate_value = model.value(res.minimizer);
            row.inner_converged = res.converged ? 1 : 0;
            trace.rows.push_back(std::move(row));
        }

        watch.start();
        x = std::move(res.minimizer);
        const long resyncs = model.resyncs();
        model.refresh(sampler.sample(), x);
        epochs += static_cast<double>(cfg.tau) / n_rows + static_cast<double>(model.resyncs() - resyncs);
        watch.stop();
    }
    trace.final_x = x;
    return trace;
}

RunTrace run_sgd(const Problem& problem, const SolverConfig& cfg)
{
    cfg.validate(problem.size());
    const double n_rows = static_cast<double>(problem.size());
    const Dataset& data = problem.data;

    RunTrace trace;
    trace.run_id = cfg.run_id;
    Stopwatch watch;
    Vector x = starting_point(problem, cfg);
    MinibatchSampler sampler(problem.size(), cfg.tau, cfg.seed);
    double epochs = 0.0;
    const double f0 = objective(problem, x);
    const bool need_gap = cfg.target_gap > 0.0;

    Vector step(problem.dim());
    for (long k = 0;; ++k) {
        const bool last = k >= cfg.outer_iters || epochs >= cfg.epochs;
        const bool record = last || k % cfg.trace_every == 0;
        double fk = std::numeric_limits<double>::quiet_NaN();
        if (record || need_gap) {
            fk = objective(problem, x);
            if (!std::isfinite(fk) || fk > 1e6 * std::max(f0, 1e-300)) {
                trace.aborted = true;
                trace.status = "aborted: diverged at iteration " + std::to_string(k);
                break;
            }
        }
        const bool reached = need_gap && fk - cfg.reference->f_star <= cfg.target_gap;
        if (record || reached) {
            TraceRow row;
            row.run_id = cfg.run_id;
            row.k = k;
            row.f = fk;
            row.grad_norm = gradient(problem, x).norm();
            row.epochs = epochs;
            row.seconds = cfg.record_time ? watch.seconds() : 0.0;
            if (cfg.reference) row.dist = (x - cfg.reference->x_star).norm();
            if (cfg.record_lyapunov) {
                const double gap = std::max(0.0, fk - cfg.reference->f_star);
                row.phi = std::pow(gap, static_cast<double>(cfg.p + 1) / cfg.q);
                row.W = std::pow((x - cfg.reference->x_star).norm(), cfg.p + 1);
            }
            trace.rows.push_back(std::move(row));
        }
        if (last || reached) break;

        watch.start();
        const double gamma = cfg.sgd_gamma0 / (1.0 + static_cast<double>(k) / cfg.sgd_k0);
        step = problem.lambda * x;
        const double inv_tau = 1.0 / static_cast<double>(cfg.tau);
        for (Index i : sampler.sample()) {
            double u = -data.offsets()[i];
            for (auto it = data.row(i); it; ++it) u += it.value() * x[it.col()];
            const double d = scalar_derivatives(data.loss(), u, 1)[1] * inv_tau;
            for (auto it = data.row(i); it; ++it) step[it.col()] += d * it.value();
        }
        x -= gamma * step;
        epochs += static_cast<double>(cfg.tau) / n_rows;
        watch.stop();
        if (!x.allFinite()) {
            trace.aborted = true;
            trace.status = "aborted: non-finite iterate at iteration " + std::to_string(k);
            break;
        }
    }
    trace.final_x = x;
    return trace;
}

RunTrace run(const Problem& problem, const SolverConfig& cfg)
{
    return cfg.method == Method::shom ? run_shom(problem, cfg) : run_sgd(problem, cfg);
}

}  // namespace shom
