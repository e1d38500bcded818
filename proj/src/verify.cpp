#include "shom/verify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace shom {

namespace {

constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0, 120.0};

Vector gaussian_vector(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

double sigmoid(double t)
{
    return scalar_derivatives(LossKind::logistic, t, 1)[1];
}

}  // namespace

// ---------------------------------------------------------------------------
// synthetic instances

Problem make_problem(const SyntheticSpec& spec)
{
    if (spec.n < 1 || spec.N < 1) throw DomainError("synthetic instance needs n, N >= 1");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix rows(spec.N, spec.n);
    for (Index i = 0; i < spec.N; ++i) rows.row(i) = gaussian_vector(spec.n, rng).transpose() * spec.scale;

    switch (spec.kind) {
    case SyntheticKind::logistic: {
        const Vector w = gaussian_vector(spec.n, rng);
        for (Index i = 0; i < spec.N; ++i) {
            const double y = unif(rng) < sigmoid(rows.row(i).dot(w)) ? 1.0 : -1.0;
            rows.row(i) *= -y;
        }
        SparseRows sparse = rows.sparseView();
        return Problem(Dataset(std::move(sparse), Vector(), LossKind::logistic, true), spec.lambda);
    }
    case SyntheticKind::quadratic: {
        const Vector truth = gaussian_vector(spec.n, rng);
        const Vector b = rows * truth + 0.1 * gaussian_vector(spec.N, rng);
        return Problem(dataset_from_dense(rows, LossKind::squared, b), spec.lambda);
    }
    case SyntheticKind::power_norm: break;
    }
    throw DomainError("power_norm instances are not GLM problems; use PowerNormFunction");
}

Vector quadratic_solution(const Problem& problem)
{
    if (problem.data.loss() != LossKind::squared)
        throw DomainError("quadratic_solution needs the squared loss");
    const Matrix a = Matrix(problem.data.rows());
    const double inv_n = 1.0 / static_cast<double>(problem.size());
    Matrix h = a.transpose() * a * inv_n;
    h.diagonal().array() += problem.lambda;
    const Vector rhs = a.transpose() * problem.data.offsets() * inv_n;
    return h.ldlt().solve(rhs);
}

double PowerNormFunction::value(const ConstVectorRef& x) const
{
    return std::pow((x - center).norm(), q) / q;
}

Vector PowerNormFunction::gradient(const ConstVectorRef& x) const
{
    const Vector d = x - center;
    const double r = d.norm();
    return r > 0.0 ? Vector(std::pow(r, q - 2.0) * d) : Vector(Vector::Zero(d.size()));
}

void write_a8a_like(std::ostream& out, Index rows, std::uint64_t seed)
{
    static constexpr int groups[] = {5, 7, 5, 16, 5, 7, 14, 6, 5, 2, 2, 2, 5, 41};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // skewed category frequencies, like one-hot encoded census attributes
    std::vector<std::vector<double>> cdf;
    std::vector<int> first;
    int offset = 1;
    for (int size : groups) {
        std::vector<double> w(static_cast<std::size_t>(size));
        for (int c = 0; c < size; ++c) w[static_cast<std::size_t>(c)] = 1.0 / std::pow(c + 1.0, 1.2);
        std::shuffle(w.begin(), w.end(), rng);
        std::partial_sum(w.begin(), w.end(), w.begin());
        for (double& v : w) v /= w.back();
        cdf.push_back(std::move(w));
        first.push_back(offset);
        offset += size;
    }
    const Vector weights = gaussian_vector(offset - 1, rng);

    for (Index r = 0; r < rows; ++r) {
        std::vector<int> active;
        for (std::size_t g = 0; g < cdf.size(); ++g) {
            const double u = unif(rng);
            const auto c = std::lower_bound(cdf[g].begin(), cdf[g].end(), u) - cdf[g].begin();
            active.push_back(first[g] + static_cast<int>(c));
        }
        double score = -1.5;
        for (int f : active) score += 0.6 * weights[f - 1];
        out << (unif(rng) < sigmoid(score) ? "+1" : "-1");
        for (int f : active) out << ' ' << f << ":1";
        out << '\n';
    }
}

void write_madelon_like(std::ostream& out, Index rows, std::uint64_t seed)
{
    constexpr int features = 500;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index r = 0; r < rows; ++r) {
        const bool positive = unif(rng) < 0.5;
        out << (positive ? "1" : "-1");
        for (int f = 1; f <= features; ++f) {
            // a handful of informative coordinates, the rest noise
            const double shift = (f <= 20 && positive) ? 8.0 : 0.0;
            const long v = std::lround(481.0 + shift + 18.0 * normal(rng));
            out << ' ' << f << ':' << v;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// reference solution

Reference reference_solution(const Problem& problem, double tol, int max_iters)
{
    Vector x = Vector::Zero(problem.dim());
    double fx = objective(problem, x);
    Vector g = gradient(problem, x);
    const double row_scale = std::max(1.0, problem.data.row_sq_norms().mean());
    for (int it = 0; it < max_iters; ++it) {
        if (g.norm() <= tol) break;
        Matrix h = hessian(problem, x);
        Eigen::LDLT<Matrix> ldlt(h);
        Vector d = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !d.allFinite() || g.dot(d) >= 0.0) d = -g;
        double t = 1.0;
        Vector trial = x + d;
        double ft = objective(problem, trial);
        while (ft > fx + 1e-4 * t * g.dot(d) && t > 1e-12) {
            t *= 0.5;
            trial = x + t * d;
            ft = objective(problem, trial);
        }
        if (ft > fx) {
            // rounding floor of f: accept a full step only if it shrinks the gradient
            const Vector gt = gradient(problem, x + d);
            if (gt.norm() >= g.norm()) break;
            trial = x + d;
            ft = objective(problem, trial);
        }
        x = std::move(trial);
        fx = ft;
        g = gradient(problem, x);
        if (x.norm() > 1e8) break;
    }
    if (x.norm() > 1e8)
        throw ConvergenceError("reference_solution: no bounded minimizer (iterates diverge)");
    if (problem.lambda < 1e-10 * row_scale) {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian(problem, x), Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < 1e-10 * row_scale)
            throw ConvergenceError("reference_solution: no bounded minimizer (flat direction)");
    }
    if (!(g.norm() <= tol))
        throw ConvergenceError("reference_solution: gradient norm " + std::to_string(g.norm()) +
                               " above tolerance");
    return Reference{x, fx, g.norm()};
}

// ---------------------------------------------------------------------------
// finite differences

double finite_difference_check(const ValueFn& value, const GradientFn& grad, const Vector& center,
                               double radius, int points, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int s = 0; s < points; ++s) {
        const Vector x = center + radius * gaussian_vector(center.size(), rng);
        const Vector g = grad(x);
        const double h = 1e-6 * (1.0 + x.norm());
        Vector fd(x.size());
        Vector xp = x;
        for (Index i = 0; i < x.size(); ++i) {
            xp[i] = x[i] + h;
            const double fp = value(xp);
            xp[i] = x[i] - h;
            const double fm = value(xp);
            xp[i] = x[i];
            fd[i] = (fp - fm) / (2.0 * h);
        }
        worst = std::max(worst, (g - fd).norm() / (1.0 + g.norm()));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// reports

bool VerificationReport::all_pass() const
{
    return std::all_of(entries.begin(), entries.end(), [](const ReportEntry& e) { return e.pass; });
}

// ---------------------------------------------------------------------------
// surrogate definition

namespace {

double distance_power_mean(const AnchorState& anchors, const ConstVectorRef& y, int p)
{
    double sum = 0.0;
    for (const auto& [id, rec] : anchors.table())
        sum += static_cast<double>(rec.refcount) * std::pow((y - rec.point).norm(), p + 1);
    return sum / static_cast<double>(anchors.size());
}

std::string format_point(const Vector& x)
{
    std::string s = "[";
    for (Index i = 0; i < std::min<Index>(x.size(), 8); ++i) {
        if (i) s += ' ';
        s += std::to_string(x[i]);
    }
    if (x.size() > 8) s += " ...";
    return s + "]";
}

}  // namespace

void SurrogateCheck::append_to(VerificationReport& report, const std::string& prefix) const
{
    report.add({prefix + "majorization", majorization, worst_error, 0.0,
                majorization ? "" : "witness " + format_point(witness)});
    report.add({prefix + "residual_bound", residual_bound, worst_residual_excess, 0.0, ""});
    report.add({prefix + "anchor_conditions", anchor_conditions,
                std::max({std::abs(anchor_value), anchor_gradient, anchor_hessian}), 0.0,
                anchor_checked ? "" : "no common anchor"});
}

SurrogateCheck check_surrogate_definition(const Problem& problem, const SurrogateModel& model,
                                          const SurrogateCheckOptions& opt)
{
    const int p = model.order();
    const AnchorState& anchors = model.anchors();
    const double lp = opt.lipschitz > 0.0 ? opt.lipschitz : lipschitz_estimate(problem, p);
    const double lh = model.mp() + lp;
    const ErrorView view{model};
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SurrogateCheck out;
    out.worst_error = std::numeric_limits<double>::infinity();
    out.worst_residual_excess = -std::numeric_limits<double>::infinity();

    auto probe = [&](const Vector& y) {
        const double h = error_value(view, y);
        if (h < out.worst_error) {
            out.worst_error = h;
            out.witness = y;
        }
        const double bound = lh / kFactorial[p + 1] * distance_power_mean(anchors, y, p);
        const double excess = h - bound;
        out.worst_residual_excess = std::max(out.worst_residual_excess, excess);
        if (excess > 1e-12 * (1.0 + std::abs(bound))) out.residual_bound = false;
    };

    std::vector<const Vector*> centers;
    for (const auto& [id, rec] : anchors.table()) {
        centers.push_back(&rec.point);
        if (centers.size() >= 10) break;
    }
    const double log_lo = std::log(opt.min_radius);
    const double log_hi = std::log(opt.max_radius);
    for (int s = 0; s < opt.samples; ++s) {
        const Vector& c = *centers[static_cast<std::size_t>(s) % centers.size()];
        Vector u = gaussian_vector(c.size(), rng);
        u.normalize();
        const double r = std::exp(log_lo + (log_hi - log_lo) * unif(rng));
        probe(c + r * u);
    }
    if (opt.adversarial) {
        const Index rows = std::min<Index>(problem.size(), 50);
        for (const Vector* c : centers) {
            for (Index j = 0; j < rows; ++j) {
                Vector dir = problem.data.rows().row(j).transpose();
                if (dir.norm() == 0.0) continue;
                dir.normalize();
                for (int k = 0; k < 40; ++k) {
                    const double r = std::exp(log_lo + (log_hi - log_lo) * k / 39.0);
                    probe(*c + r * dir);
                    probe(*c - r * dir);
                }
            }
        }
    }
    out.majorization = out.worst_error >= -opt.majorization_tol;

    if (anchors.distinct() == 1) {
        out.anchor_checked = true;
        const Vector& x = anchors.table().begin()->second.point;
        out.anchor_value = error_value(view, x);
        out.anchor_gradient = error_gradient(view, x).norm();
        bool ok = std::abs(out.anchor_value) <= opt.anchor_tol && out.anchor_gradient <= opt.anchor_tol;
        if (p >= 2) {
            const double eps = 1e-6;
            const double scale = std::max(1.0, lh);
            for (int t = 0; t < 5; ++t) {
                Vector v = gaussian_vector(x.size(), rng);
                v.normalize();
                const Vector hv = (error_gradient(view, x + eps * v) - error_gradient(view, x - eps * v)) / (2.0 * eps);
                out.anchor_hessian = std::max(out.anchor_hessian, hv.norm() / scale);
            }
            ok = ok && out.anchor_hessian <= 1e-6;
        }
        out.anchor_conditions = ok;
    }
    return out;
}

// ---------------------------------------------------------------------------
// rates

RateReport fit_contraction(const std::vector<std::vector<double>>& series, long begin, long end,
                           double bound, double floor, double slack_sigmas)
{
    RateReport rep;
    rep.bound = bound;
    rep.slack_sigmas = slack_sigmas;
    rep.window_begin = begin;
    rep.window_end = end;
    std::vector<double> factors;
    for (const auto& s : series) {
        long stop = std::min<long>(end, static_cast<long>(s.size()));
        for (long k = begin; k < stop; ++k) {
            if (!(s[static_cast<std::size_t>(k)] > floor)) {
                stop = k;
                break;
            }
        }
        if (stop < end) {
            rep.window_end = std::min(rep.window_end, stop);
            rep.warning = "window shrunk to " + std::to_string(rep.window_end) + " (numerical floor)";
        }
        const long m = stop - begin;
        if (m < 2) continue;
        double sk = 0, sy = 0, skk = 0, sky = 0;
        for (long k = begin; k < stop; ++k) {
            const double y = std::log(s[static_cast<std::size_t>(k)]);
            const double kk = static_cast<double>(k - begin);
            sk += kk;
            sy += y;
            skk += kk * kk;
            sky += kk * y;
        }
        const double md = static_cast<double>(m);
        const double slope = (md * sky - sk * sy) / (md * skk - sk * sk);
        factors.push_back(std::exp(slope));
    }
    rep.seeds = static_cast<int>(factors.size());
    if (factors.empty()) {
        rep.warning = "no series long enough to fit";
        return rep;
    }
    const double mean = std::accumulate(factors.begin(), factors.end(), 0.0) / factors.size();
    double var = 0.0;
    for (double f : factors) var += (f - mean) * (f - mean);
    rep.factor = mean;
    rep.stderr_ = factors.size() > 1 ? std::sqrt(var / (factors.size() - 1) / factors.size()) : 0.0;
    rep.ci_low = mean - slack_sigmas * rep.stderr_;
    rep.ci_high = mean + slack_sigmas * rep.stderr_;
    rep.pass = mean <= bound + slack_sigmas * rep.stderr_;
    return rep;
}

ContractionReports estimate_contraction(const Problem& problem, SolverConfig cfg,
                                        const Reference& reference, int seeds, long begin, long end,
                                        double alpha, double slack_sigmas)
{
    if (seeds < 1) throw DomainError("estimate_contraction: seeds must be >= 1");
    if (begin < 0 || end <= begin + 1) throw DomainError("estimate_contraction: bad window");
    cfg.record_lyapunov = true;
    cfg.reference = reference;
    cfg.trace_every = 1;
    cfg.outer_iters = static_cast<int>(end);
    const double bound = 1.0 - (1.0 - alpha) * static_cast<double>(cfg.tau) / problem.size();
    const double phi_floor = std::pow(1e-11, static_cast<double>(cfg.p + 1) / cfg.q);
    const double w_floor = std::pow(1e-9, cfg.p + 1.0);

    ContractionReports out;
    std::vector<std::vector<double>> phi, w;
    const std::uint64_t base = cfg.seed;
    for (int s = 0; s < seeds; ++s) {
        cfg.seed = base + static_cast<std::uint64_t>(s);
        cfg.run_id = "seed" + std::to_string(cfg.seed);
        RunTrace trace = run_shom(problem, cfg);
        std::vector<double> ps, ws;
        for (const TraceRow& row : trace.rows) {
            ps.push_back(row.phi);
            ws.push_back(row.W);
        }
        phi.push_back(std::move(ps));
        w.push_back(std::move(ws));
        out.traces.push_back(std::move(trace));
    }
    out.phi = fit_contraction(phi, begin, end, bound, phi_floor, slack_sigmas);
    out.W = fit_contraction(w, begin, end, bound, w_floor, slack_sigmas);
    return out;
}

Vector warm_start(const Problem& problem, const Reference& reference, double fraction)
{
    const double gap0 = objective(problem, Vector::Zero(problem.dim())) - reference.f_star;
    double t = 1.0;
    for (int it = 0; it < 200; ++it) {
        const Vector x = (1.0 - t) * reference.x_star;
        if (objective(problem, x) - reference.f_star <= fraction * gap0) return x;
        t *= 0.5;
    }
    return reference.x_star;
}

ReportEntry check_lyapunov_sandwich(const RunTrace& trace, const Reference& reference, double sigma,
                                 double q, double lh, int p, double tol)
{
    ReportEntry e{"lyapunov_sandwich", true, 0.0, tol, ""};
    for (std::size_t i = 0; i + 1 < trace.rows.size(); ++i) {
        const TraceRow& cur = trace.rows[i];
        const TraceRow& next = trace.rows[i + 1];
        if (next.k != cur.k + 1 || std::isnan(cur.W) || std::isnan(next.dist)) continue;
        const double gap = next.f - reference.f_star;
        const double lower = sigma / q * std::pow(next.dist, q);
        const double upper = lh / kFactorial[p + 1] * cur.W;
        const double violation = std::max(lower - gap, gap - upper);
        e.value = std::max(e.value, violation);
        if (violation > tol) {
            e.pass = false;
            e.detail = "violated at k=" + std::to_string(next.k);
        }
    }
    return e;
}

std::vector<double> superlinear_ratios(const RunTrace& trace, double f_star, double expo, double floor)
{
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < trace.rows.size(); ++i) {
        const TraceRow& cur = trace.rows[i];
        const TraceRow& next = trace.rows[i + 1];
        if (next.k != cur.k + 1) continue;
        const double g0 = cur.f - f_star;
        const double g1 = next.f - f_star;
        if (!(g0 > floor) || !(g1 > floor)) break;
        out.push_back(g1 / std::pow(g0, expo));
    }
    return out;
}

// ---------------------------------------------------------------------------
// brute force

Vector brute_force_minimize(const ValueFn& fn, const Vector& center, double radius, int grid)
{
    const Index n = center.size();
    if (n < 1 || n > 2) throw DomainError("brute_force_minimize supports n in {1, 2}");
    const double h = 2.0 * radius / (grid - 1);
    Vector best = center;
    double best_v = fn(best);
    Vector y = center;
    const int outer = n == 2 ? grid : 1;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < outer; ++j) {
            y[0] = center[0] - radius + h * i;
            if (n == 2) y[1] = center[1] - radius + h * j;
            const double v = fn(y);
            if (v < best_v) {
                best_v = v;
                best = y;
            }
        }
    }
    // compass search
    double step = h;
    while (step > 1e-13 * (1.0 + best.norm())) {
        bool moved = false;
        for (Index d = 0; d < n; ++d) {
            for (double sgn : {1.0, -1.0}) {
                Vector t = best;
                t[d] += sgn * step;
                const double v = fn(t);
                if (v < best_v) {
                    best_v = v;
                    best = t;
                    moved = true;
                }
            }
        }
        if (!moved) step *= 0.5;
    }
    return best;
}

}  // namespace shom
