#include "shom/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace shom {

namespace fs = std::filesystem;

std::optional<double> epochs_to_gap(const RunTrace& trace, double f_star, double target)
{
    for (const TraceRow& r : trace.rows)
        if (r.f - f_star <= target) return r.epochs;
    return std::nullopt;
}

std::string plot_script()
{
    return R"(#!/usr/bin/env python3
"""Plot f(x_k) - f* against epochs for every trace in this directory."""
import csv
import glob
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "reference.json")) as fh:
    f_star = json.load(fh)["f_star"]

fig, ax = plt.subplots(figsize=(7, 4.5))
for path in sorted(glob.glob(os.path.join(here, "trace_*.csv"))):
    xs, ys = [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            gap = float(row["f"]) - f_star
            if gap > 0:
                xs.append(float(row["epochs"]))
                ys.append(gap)
    if xs:
        ax.semilogy(xs, ys, label=os.path.basename(path)[len("trace_"):-len(".csv")])
ax.set_xlabel("epochs")
ax.set_ylabel("f(x_k) - f*")
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig(os.path.join(here, "convergence.png"), dpi=150)
)";
}

namespace {

struct Options {
    std::string config;
    std::string data;
    std::string loss;
    std::string method;
    std::string inner_method;
    std::string reference;
    std::string out_dir = ".";
    std::string run_id;
    int p = 2;
    int q = 2;
    Index tau = 1;
    double lambda = 1e-3;
    double mp = 0.0;
    double mp_scale = 1.0;
    std::uint64_t seed = 0;
    int outer_iters = 100;
    double epochs = 0.0;
    double inner_tol = 1e-6;
    double target_gap = 0.0;
    int trace_every = 1;
    Index limit = 0;
    Index dim = 0;
    int jobs = 1;
    bool no_timing = false;
    double sgd_gamma0 = 0.1;
    double sgd_k0 = 100.0;

    std::vector<int> grid_p;
    std::vector<Index> grid_tau;
    std::vector<std::uint64_t> grid_seeds;
    std::vector<std::string> grid_methods;

    double tol = 1e-12;
    bool contraction = false;
    int seeds = 20;
    int samples = 1000;

    std::string kind = "a8a";
    Index rows = 0;
    std::string output;

    // one entry per subcommand that declares the flag
    std::map<std::string, std::vector<CLI::Option*>> opt;

    bool given(const std::string& name) const
    {
        const auto it = opt.find(name);
        if (it == opt.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(), [](const CLI::Option* x) { return x->count() > 0; });
    }
};

class CliError : public Error {
public:
    using Error::Error;
};

void add_problem_options(CLI::App* app, Options& o)
{
    o.opt["config"].push_back(app->add_option("--config", o.config, "JSON configuration file"));
    o.opt["data"].push_back(app->add_option("--data", o.data, "LIBSVM dataset"));
    o.opt["loss"].push_back(app->add_option("--loss", o.loss, "logistic or squared"));
    o.opt["lambda"].push_back(app->add_option("--lambda", o.lambda, "l2 regularization"));
    o.opt["limit"].push_back(app->add_option("--limit", o.limit, "use the first N rows of the dataset"));
    o.opt["dim"].push_back(app->add_option("--dim", o.dim, "expected feature dimension"));
    o.opt["out-dir"].push_back(app->add_option("--out-dir", o.out_dir, "output directory (default .)"));
}

void add_solver_options(CLI::App* app, Options& o)
{
    o.opt["p"].push_back(app->add_option("--p", o.p, "surrogate order (1, 2 or 3)"));
    o.opt["q"].push_back(app->add_option("--q", o.q, "uniform convexity degree used in Lyapunov tracking"));
    o.opt["tau"].push_back(app->add_option("--tau", o.tau, "minibatch size"));
    o.opt["mp"].push_back(app->add_option("--mp", o.mp, "regularization constant M_p (default p*L_p)"));
    o.opt["seed"].push_back(app->add_option("--seed", o.seed, "sampler seed"));
    o.opt["outer-iters"].push_back(app->add_option("--outer-iters", o.outer_iters, "outer iteration budget"));
    o.opt["epochs"].push_back(app->add_option("--epochs", o.epochs, "epoch budget"));
    o.opt["inner-tol"].push_back(app->add_option("--inner-tol", o.inner_tol, "inner gradient tolerance cap"));
    o.opt["inner-method"].push_back(
        app->add_option("--inner-method", o.inner_method, "newton, gradient or prox-gradient"));
    o.opt["method"].push_back(app->add_option("--method", o.method, "shom or sgd"));
    o.opt["reference"].push_back(app->add_option("--reference", o.reference, "reference file (x*, f*)"));
    o.opt["target-gap"].push_back(app->add_option("--target-gap", o.target_gap, "stop once f - f* <= gap"));
    o.opt["trace-every"].push_back(app->add_option("--trace-every", o.trace_every, "record every k-th iteration"));
    o.opt["run-id"].push_back(app->add_option("--run-id", o.run_id, "run identifier"));
    o.opt["sgd-gamma0"].push_back(app->add_option("--sgd-gamma0", o.sgd_gamma0, "SGD initial step"));
    o.opt["sgd-k0"].push_back(app->add_option("--sgd-k0", o.sgd_k0, "SGD step decay scale"));
    app->add_flag("--no-timing", o.no_timing, "write 0 in the seconds column (byte-reproducible traces)");
}

RunConfig build_config(const Options& o)
{
    RunConfig rc = o.config.empty() ? RunConfig{} : load_config(o.config);
    SolverConfig& s = rc.solver;
    if (o.given("data")) rc.dataset = o.data;
    if (o.given("loss")) rc.loss = loss_from_string(o.loss);
    if (o.given("limit")) rc.limit = o.limit;
    if (o.given("dim")) rc.dim = o.dim;
    if (o.given("reference")) rc.reference_path = o.reference;
    if (o.given("lambda")) s.lambda = o.lambda;
    if (o.given("p")) s.p = o.p;
    if (o.given("q")) s.q = o.q;
    if (o.given("tau")) s.tau = o.tau;
    if (o.given("mp")) s.mp = o.mp;
    if (o.given("seed")) s.seed = o.seed;
    if (o.given("outer-iters")) s.outer_iters = o.outer_iters;
    if (o.given("epochs")) s.epochs = o.epochs;
    if (o.given("inner-tol")) s.inner.grad_tol = o.inner_tol;
    if (o.given("inner-method")) s.inner.method = inner_method_from_string(o.inner_method);
    if (o.given("method")) s.method = method_from_string(o.method);
    if (o.given("target-gap")) s.target_gap = o.target_gap;
    if (o.given("trace-every")) s.trace_every = o.trace_every;
    if (o.given("run-id")) s.run_id = o.run_id;
    if (o.given("sgd-gamma0")) s.sgd_gamma0 = o.sgd_gamma0;
    if (o.given("sgd-k0")) s.sgd_k0 = o.sgd_k0;
    if (o.no_timing) s.record_time = false;
    if (rc.limit && *rc.limit < 1) throw ConfigError("limit out of range");
    if (rc.dim && *rc.dim < 1) throw ConfigError("dim out of range");
    validate_ranges(s);
    return rc;
}

Problem load_problem(const RunConfig& rc, std::ostream& out)
{
    if (rc.dataset.empty()) throw CliError("dataset required (--data or config key 'dataset')");
    LibsvmOptions lo;
    lo.expected_dim = rc.dim;
    lo.limit = rc.limit;
    lo.loss = rc.loss;
    LibsvmData d = load_libsvm(rc.dataset, lo);
    out << "loaded " << rc.dataset << ": N=" << d.data.size() << " n=" << d.data.dim()
        << (d.labels_normalized ? " (0/1 labels mapped to -1/+1)" : "") << '\n';
    return Problem(std::move(d.data), rc.solver.lambda);
}

Reference load_reference(const RunConfig& rc, const Problem& problem)
{
    Reference ref = read_reference(fs::path(rc.reference_path));
    require_dim("reference x_star", problem.dim(), ref.x_star.size());
    return ref;
}

fs::path ensure_dir(const std::string& dir)
{
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_solve(const Options& o, std::ostream& out)
{
    RunConfig rc = build_config(o);
    const Problem problem = load_problem(rc, out);
    SolverConfig& cfg = rc.solver;
    if (!rc.reference_path.empty()) cfg.reference = load_reference(rc, problem);
    if (cfg.run_id == "run") cfg.run_id = std::string(to_string(cfg.method)) + "_p" + std::to_string(cfg.p) +
                                          "_tau" + std::to_string(cfg.tau) + "_s" + std::to_string(cfg.seed);
    cfg.record_lyapunov = cfg.reference.has_value() && cfg.method == Method::shom;

    const RunTrace trace = run(problem, cfg);
    const fs::path path = ensure_dir(o.out_dir) / ("trace_" + cfg.run_id + ".csv");
    write_trace(trace, path);

    const TraceRow& last = trace.rows.back();
    out << "trace: " << path.string() << '\n'
        << "f = " << num(last.f) << "\ngrad_norm = " << num(last.grad_norm) << "\nepochs = " << num(last.epochs)
        << "\nstatus: " << trace.status << '\n';
    return trace.aborted ? 2 : 0;
}

int cmd_benchmark(const Options& o, std::ostream& out, std::ostream& err)
{
    RunConfig rc = build_config(o);
    Grid& grid = rc.grid;
    const bool any = !grid.p.empty() || !grid.tau.empty() || !grid.seeds.empty() || !grid.methods.empty() ||
                     o.given("grid-p") || o.given("grid-tau") || o.given("grid-seeds") || o.given("grid-methods");
    if (o.given("grid-p")) grid.p = o.grid_p;
    if (o.given("grid-tau")) grid.tau = o.grid_tau;
    if (o.given("grid-seeds")) grid.seeds = o.grid_seeds;
    if (o.given("grid-methods")) {
        grid.methods.clear();
        for (const auto& m : o.grid_methods) grid.methods.push_back(method_from_string(m));
    }
    if (!any) throw CliError("empty grid");
    if (grid.p.empty() && !o.given("grid-p")) grid.p = {rc.solver.p};
    if (grid.tau.empty() && !o.given("grid-tau")) grid.tau = {rc.solver.tau};
    if (grid.seeds.empty() && !o.given("grid-seeds")) grid.seeds = {rc.solver.seed};
    if (grid.methods.empty() && !o.given("grid-methods")) grid.methods = {rc.solver.method};
    if (grid.empty()) throw CliError("empty grid");

    const Problem problem = load_problem(rc, out);
    const fs::path dir = ensure_dir(o.out_dir);
    Reference ref;
    if (!rc.reference_path.empty()) {
        ref = load_reference(rc, problem);
    } else {
        out << "computing reference solution\n";
        ref = reference_solution(problem);
    }
    write_reference(ref, dir / "reference.json");

    struct Cell {
        SolverConfig cfg;
        std::string status;
        RunTrace trace;
        bool failed = false;
    };
    std::vector<Cell> cells;
    for (Method m : grid.methods) {
        const std::vector<int> ps = m == Method::sgd ? std::vector<int>{grid.p.front()} : grid.p;
        for (int p : ps)
            for (Index tau : grid.tau)
                for (std::uint64_t seed : grid.seeds) {
                    Cell c;
                    c.cfg = rc.solver;
                    c.cfg.method = m;
                    c.cfg.p = p;
                    c.cfg.tau = tau;
                    c.cfg.seed = seed;
                    c.cfg.reference = ref;
                    c.cfg.run_id = m == Method::sgd
                                       ? "sgd_tau" + std::to_string(tau) + "_s" + std::to_string(seed)
                                       : "shom_p" + std::to_string(p) + "_tau" + std::to_string(tau) + "_s" +
                                             std::to_string(seed);
                    cells.push_back(std::move(c));
                }
    }

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            Cell& c = cells[i];
            try {
                c.trace = run(problem, c.cfg);
                write_trace(c.trace, dir / ("trace_" + c.cfg.run_id + ".csv"));
                c.status = c.trace.status;
                c.failed = c.trace.aborted;
            } catch (const std::exception& e) {
                c.status = std::string("error: ") + e.what();
                c.failed = true;
            }
            std::lock_guard<std::mutex> lock(log_mutex);
            out << "cell " << c.cfg.run_id << ": " << c.status << '\n';
        }
    };
    const int jobs = std::max(1, std::min<int>(o.jobs, static_cast<int>(cells.size())));
    std::vector<std::thread> threads;
    for (int t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    std::ostringstream summary;
    summary << "cell,method,p,tau,seed,status,final_gap,epochs_to_1e-4,epochs_to_1e-8,epochs_to_1e-12\n";
    std::size_t failures = 0;
    for (const Cell& c : cells) {
        failures += c.failed ? 1 : 0;
        summary << c.cfg.run_id << ',' << to_string(c.cfg.method) << ',';
        if (c.cfg.method == Method::shom) summary << c.cfg.p;
        summary << ',' << c.cfg.tau << ',' << c.cfg.seed << ",\"" << c.status << "\",";
        if (!c.trace.rows.empty()) summary << num(c.trace.rows.back().f - ref.f_star);
        for (double target : {1e-4, 1e-8, 1e-12}) {
            summary << ',';
            if (const auto e = epochs_to_gap(c.trace, ref.f_star, target)) summary << num(*e);
        }
        summary << '\n';
    }
    {
        std::ofstream f(dir / "summary.csv", std::ios::binary | std::ios::trunc);
        f << summary.str();
        if (!f) throw Error("cannot write '" + (dir / "summary.csv").string() + "'");
        std::ofstream py(dir / "plot.py", std::ios::binary | std::ios::trunc);
        py << plot_script();
        if (!py) throw Error("cannot write '" + (dir / "plot.py").string() + "'");
    }
    out << "summary: " << (dir / "summary.csv").string() << '\n';
    if (failures == cells.size()) {
        err << "error: every benchmark cell failed\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------

void verify_surrogates(const Problem& problem, const Options& o, std::optional<int> only_p,
                       VerificationReport& report, const std::string& tag)
{
    std::mt19937_64 rng(o.seed + 11);
    std::normal_distribution<double> normal;
    auto random_point = [&](double scale) {
        Vector x(problem.dim());
        for (Index i = 0; i < x.size(); ++i) x[i] = scale * normal(rng);
        return x;
    };
    for (int p = 1; p <= 3; ++p) {
        if (only_p && p != *only_p) continue;
        double mp = o.given("mp") ? o.mp : default_mp(problem, p);
        mp *= o.mp_scale;
        SurrogateCheckOptions opt;
        opt.samples = o.samples;
        opt.seed = o.seed + static_cast<std::uint64_t>(p);
        const std::string prefix = tag + "p" + std::to_string(p) + ".";

        // single anchor (anchor conditions) and a mixed anchor state
        SurrogateModel fresh(problem, p, mp, random_point(0.5), MomentMode::disabled);
        check_surrogate_definition(problem, fresh, opt).append_to(report, prefix + "single.");

        SurrogateModel mixed(problem, p, mp, random_point(0.5), MomentMode::disabled);
        MinibatchSampler sampler(problem.size(), std::max<Index>(1, problem.size() / 4), o.seed + 3);
        for (int r = 0; r < 3; ++r) mixed.refresh(sampler.sample(), random_point(0.5));
        SurrogateCheck mc = check_surrogate_definition(problem, mixed, opt);
        mc.anchor_conditions = true;  // no common anchor
        report.add({prefix + "mixed.majorization", mc.majorization, mc.worst_error, -opt.majorization_tol,
                    mc.majorization ? "" : "witness y with h(y) = " + num(mc.worst_error)});
        report.add({prefix + "mixed.residual_bound", mc.residual_bound, mc.worst_residual_excess, 0.0, ""});

        const double fd = finite_difference_check(
            [&](const Vector& y) { return surrogate_value(mixed, y); },
            [&](const Vector& y) { return surrogate_gradient(mixed, y); }, random_point(0.5), 1.0, 5,
            o.seed + 5);
        report.add({prefix + "surrogate_gradient_fd", fd <= 1e-5, fd, 1e-5, ""});
    }
    const double fd = finite_difference_check([&](const Vector& x) { return objective(problem, x); },
                                              [&](const Vector& x) { return gradient(problem, x); },
                                              Vector::Zero(problem.dim()), 1.0, 5, o.seed + 7);
    report.add({tag + "objective_gradient_fd", fd <= 1e-5, fd, 1e-5, ""});
}

void verify_contraction(const Problem& problem, const Reference& ref, SolverConfig cfg, const Options& o,
                        VerificationReport& report, const std::string& tag)
{
    cfg.x0 = warm_start(problem, ref, 1e-2);
    cfg.record_time = false;
    const long window = std::max<long>(20, 4 * problem.size() / cfg.tau);
    const ContractionReports cr = estimate_contraction(problem, cfg, ref, o.seeds, 0, window);
    for (const auto& [name, r] : {std::pair{"phi", &cr.phi}, std::pair{"W", &cr.W}})
        report.add({tag + "contraction_" + name, r->pass, r->factor, r->bound + r->slack_sigmas * r->stderr_,
                    "stderr " + num(r->stderr_) + " over " + std::to_string(r->seeds) + " seeds" +
                        (r->warning.empty() ? "" : "; " + r->warning)});
}

int cmd_verify(const Options& o, std::ostream& out)
{
    VerificationReport report;
    const bool has_data = o.given("data") || !o.config.empty();
    if (has_data) {
        RunConfig rc = build_config(o);
        if (o.contraction && rc.reference_path.empty()) throw CliError("reference required");
        const Problem problem = load_problem(rc, out);
        verify_surrogates(problem, o, o.given("p") ? std::optional<int>(rc.solver.p) : std::nullopt, report, "");
        if (o.contraction) verify_contraction(problem, load_reference(rc, problem), rc.solver, o, report, "");
    } else {
        SyntheticSpec spec;
        spec.n = 5;
        spec.N = 40;
        spec.lambda = 1e-2;
        spec.seed = o.seed + 1;
        const Problem logistic = make_problem(spec);
        verify_surrogates(logistic, o, std::nullopt, report, "logistic.");

        spec.kind = SyntheticKind::quadratic;
        const Problem quad = make_problem(spec);
        const Reference qref = reference_solution(quad);
        const double qerr = (qref.x_star - quadratic_solution(quad)).norm();
        report.add({"quadratic.reference_vs_linear_solve", qerr <= 1e-10, qerr, 1e-10, ""});

        std::mt19937_64 rng(o.seed + 13);
        std::uniform_real_distribution<double> unif(-3.0, 3.0);
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            Vector y0(3);
            for (Index i = 0; i < 3; ++i) y0[i] = unif(rng);
            const int p = 2 + t % 2;
            const double c = std::exp(unif(rng));
            const Vector y = prox_power_norm(y0, c, p);
            const double fact = p == 2 ? 2.0 : 6.0;
            const Vector resid = c / fact * std::pow(y.norm(), p - 1) * y + y - y0;
            worst = std::max(worst, resid.norm() / (1.0 + y0.norm()));
        }
        report.add({"prox.optimality", worst <= 1e-10, worst, 1e-10, ""});

        if (o.contraction) {
            SolverConfig cfg;
            cfg.p = 2;
            cfg.tau = 4;
            cfg.lambda = spec.lambda;
            cfg.seed = o.seed;
            verify_contraction(logistic, reference_solution(logistic), cfg, o, report, "logistic.");
        }
    }

    const fs::path path = ensure_dir(o.out_dir) / "verify_report.csv";
    write_report(report, path);
    std::size_t failed = 0;
    for (const ReportEntry& e : report.entries) {
        out << (e.pass ? "PASS " : "FAIL ") << e.check << "  value=" << num(e.value);
        if (!e.detail.empty()) out << "  " << e.detail;
        out << '\n';
        failed += e.pass ? 0 : 1;
    }
    out << "report: " << path.string() << '\n'
        << report.entries.size() - failed << '/' << report.entries.size() << " checks passed\n";
    return report.all_pass() ? 0 : 1;
}

int cmd_reference(const Options& o, std::ostream& out)
{
    RunConfig rc = build_config(o);
    const Problem problem = load_problem(rc, out);
    const Reference ref = reference_solution(problem, o.tol);
    const fs::path path = o.output.empty() ? ensure_dir(o.out_dir) / "reference.json" : fs::path(o.output);
    write_reference(ref, path);
    out << "f_star = " << num(ref.f_star) << "\ngrad_norm = " << num(ref.grad_norm) << "\nreference: "
        << path.string() << '\n';
    return 0;
}

int cmd_generate(const Options& o, std::ostream& out)
{
    if (o.output.empty()) throw CliError("--output required");
    std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + o.output + "' for writing");
    if (o.kind == "a8a") write_a8a_like(f, o.rows > 0 ? o.rows : 5000, o.seed);
    else if (o.kind == "madelon") write_madelon_like(f, o.rows > 0 ? o.rows : 2000, o.seed);
    else throw CliError("unknown kind '" + o.kind + "' (a8a or madelon)");
    f.flush();
    if (!f) throw Error("failed writing '" + o.output + "'");
    out << "wrote " << o.output << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Stochastic higher-order majorization-minimization for regularized GLMs", "shom"};
    app.require_subcommand(1, 1);
    Options o;

    CLI::App* solve = app.add_subcommand("solve", "run one SHOM or SGD solve and write its trace");
    add_problem_options(solve, o);
    add_solver_options(solve, o);

    CLI::App* bench = app.add_subcommand("benchmark", "run a grid of solves; write traces, summary.csv and plot.py");
    add_problem_options(bench, o);
    add_solver_options(bench, o);
    o.opt["jobs"].push_back(bench->add_option("--jobs", o.jobs, "cells run in parallel"));
    o.opt["grid-p"].push_back(bench->add_option("--grid-p", o.grid_p, "orders, comma separated")->delimiter(','));
    o.opt["grid-tau"].push_back(bench->add_option("--grid-tau", o.grid_tau, "minibatch sizes")->delimiter(','));
    o.opt["grid-seeds"].push_back(bench->add_option("--grid-seeds", o.grid_seeds, "seeds")->delimiter(','));
    o.opt["grid-methods"].push_back(bench->add_option("--grid-methods", o.grid_methods, "shom,sgd")->delimiter(','));

    CLI::App* verify = app.add_subcommand(
        "verify", "check surrogate definitions, gradients and rates; exit 0 iff every check passes");
    add_problem_options(verify, o);
    add_solver_options(verify, o);
    verify->add_option("--mp-scale", o.mp_scale, "multiply M_p (values < 1 test an undersized constant)");
    verify->add_option("--samples", o.samples, "sampled points per surrogate check");
    verify->add_flag("--contraction", o.contraction, "also estimate Lyapunov contraction factors");
    verify->add_option("--seeds", o.seeds, "seeds for contraction estimates");

    CLI::App* reference = app.add_subcommand("reference", "compute and store (x*, f*)");
    add_problem_options(reference, o);
    reference->add_option("--tol", o.tol, "gradient norm tolerance (default 1e-12)");
    reference->add_option("--output", o.output, "reference file (default OUT_DIR/reference.json)");

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic LIBSVM file shaped like a8a or madelon");
    generate->add_option("--kind", o.kind, "a8a or madelon");
    generate->add_option("--rows", o.rows, "number of rows");
    generate->add_option("--seed", o.seed, "generator seed");
    generate->add_option("--output", o.output, "output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (solve->parsed()) return cmd_solve(o, out);
        if (bench->parsed()) return cmd_benchmark(o, out, err);
        if (verify->parsed()) return cmd_verify(o, out);
        if (reference->parsed()) return cmd_reference(o, out);
        return cmd_generate(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"shom"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace shom
