#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace shom;
using shom::test::random_vector;

TEST_CASE("reference solution of a quadratic matches the linear solve")
{
    const Problem pr = shom::test::quadratic_problem(6, 40, 1e-3, 1);
    const Reference ref = reference_solution(pr);
    CHECK(ref.grad_norm <= 1e-12);
    CHECK((ref.x_star - quadratic_solution(pr)).norm() <= 1e-10);
}

TEST_CASE("symmetric logistic data has its minimizer at the origin")
{
    std::mt19937_64 rng(2);
    const Matrix half = shom::test::random_matrix(5, 3, rng);
    Matrix a(10, 3);
    a << half, -half;
    const Problem pr(dataset_from_dense(a, LossKind::logistic), 0.1);
    const Reference ref = reference_solution(pr);
    CHECK(ref.x_star.norm() <= 1e-12);
    CHECK(ref.f_star == doctest::Approx(std::log(2.0)));
}

TEST_CASE("separable data without regularization has no bounded minimizer")
{
    std::mt19937_64 rng(3);
    Matrix a = shom::test::random_matrix(20, 3, rng);
    // folded rows with a_i . w < 0 for w = (1, 1, 1): separable
    for (Index i = 0; i < a.rows(); ++i)
        if (a.row(i).sum() > -0.1) a.row(i) -= (a.row(i).sum() + 1.0) / 3.0 * Eigen::RowVectorXd::Ones(3);
    const Problem pr(dataset_from_dense(a, LossKind::logistic), 0.0);
    CHECK_THROWS_WITH_AS(reference_solution(pr), doctest::Contains("no bounded minimizer"), ConvergenceError);
}

TEST_CASE("finite differences")
{
    Vector c(3);
    c << 1.0, -2.0, 0.5;
    const double lin = finite_difference_check([&](const Vector& x) { return c.dot(x); },
                                               [&](const Vector&) { return c; }, Vector::Zero(3), 1.0, 20, 1);
    CHECK(lin <= 1e-10);

    const Problem pr = shom::test::logistic_problem(4, 30, 0.01, 4);
    const double obj = finite_difference_check([&](const Vector& x) { return objective(pr, x); },
                                               [&](const Vector& x) { return gradient(pr, x); },
                                               Vector::Zero(4), 1.0, 20, 2);
    CHECK(obj <= 1e-5);

    SurrogateModel m(pr, 3, default_mp(pr, 3), Vector::Ones(4));
    MinibatchSampler s(30, 7, 3);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 3; ++t) m.refresh(s.sample(), random_vector(4, rng));
    const double sur = finite_difference_check([&](const Vector& y) { return surrogate_value(m, y); },
                                               [&](const Vector& y) { return surrogate_gradient(m, y); },
                                               Vector::Zero(4), 1.0, 20, 5);
    CHECK(sur <= 1e-5);
}

TEST_CASE("power norm instances are uniformly convex")
{
    std::mt19937_64 rng(5);
    for (double q : {2.0, 3.0, 4.0}) {
        const PowerNormFunction fn{random_vector(3, rng), q};
        for (int t = 0; t < 10000; ++t) {
            const Vector x = random_vector(3, rng, 2.0);
            const Vector y = random_vector(3, rng, 2.0);
            const double lower =
                fn.value(x) + fn.gradient(x).dot(y - x) + fn.sigma() / q * std::pow((x - y).norm(), q);
            CHECK(fn.value(y) >= lower - 1e-12 * (1.0 + std::abs(fn.value(y))));
        }
    }
}

TEST_CASE("surrogate definition checks pass with the default constant")
{
    const Problem pr = shom::test::logistic_problem(5, 40, 1e-2, 6);
    std::mt19937_64 rng(7);
    for (int p = 1; p <= 3; ++p) {
        SurrogateModel single(pr, p, default_mp(pr, p), random_vector(5, rng, 0.5));
        const SurrogateCheck c1 = check_surrogate_definition(pr, single);
        CHECK(c1.pass());
        CHECK(c1.anchor_checked);

        SurrogateModel mixed(pr, p, default_mp(pr, p), random_vector(5, rng, 0.5));
        MinibatchSampler s(40, 10, 8);
        for (int t = 0; t < 3; ++t) mixed.refresh(s.sample(), random_vector(5, rng, 0.5));
        const SurrogateCheck c2 = check_surrogate_definition(pr, mixed);
        CHECK(c2.majorization);
        CHECK(c2.residual_bound);
        CHECK_FALSE(c2.anchor_checked);
    }
}

TEST_CASE("exact quadratic surrogate has h identically zero")
{
    const Problem pr = shom::test::quadratic_problem(4, 20, 0.1, 9);
    SurrogateModel m(pr, 2, 0.0, Vector::Ones(4));
    SurrogateCheckOptions opt;
    opt.lipschitz = 0.0;
    const SurrogateCheck c = check_surrogate_definition(pr, m, opt);
    CHECK(c.pass());
    CHECK(std::abs(c.worst_error) <= 1e-10);
}

TEST_CASE("an undersized constant is caught with a witness")
{
    // away from the origin: at x = 0 the logistic quadratic model alone majorizes
    const Problem pr = shom::test::logistic_problem(5, 40, 1e-2, 10);
    std::mt19937_64 rng(14);
    SurrogateModel m(pr, 2, lipschitz_estimate(pr, 2) / 10, random_vector(5, rng));
    const SurrogateCheck c = check_surrogate_definition(pr, m);
    CHECK_FALSE(c.majorization);
    REQUIRE(c.witness.size() == 5);
    CHECK(error_value(ErrorView{m}, c.witness) < -1e-10);
    VerificationReport report;
    c.append_to(report, "p2.");
    CHECK_FALSE(report.all_pass());
}

TEST_CASE("contraction fit recovers a geometric sequence")
{
    std::vector<double> s;
    for (int k = 0; k < 50; ++k) s.push_back(std::pow(0.9, k));
    const RateReport r = fit_contraction({s, s, s}, 0, 50, 0.95);
    CHECK(std::abs(r.factor - 0.9) <= 1e-6);
    CHECK(r.pass);
    CHECK(r.seeds == 3);

    const RateReport shrunk = fit_contraction({s}, 0, 50, 0.95, 1e-2);
    CHECK(shrunk.window_end < 50);
    CHECK_FALSE(shrunk.warning.empty());
    CHECK(std::abs(shrunk.factor - 0.9) <= 1e-6);

    const RateReport slow = fit_contraction({s}, 0, 50, 0.85);
    CHECK_FALSE(slow.pass);
}

TEST_CASE("warm start lies inside the requested gap")
{
    const Problem pr = shom::test::logistic_problem(5, 50, 1e-2, 11);
    const Reference ref = reference_solution(pr);
    const Vector x0 = warm_start(pr, ref, 1e-2);
    const double gap0 = objective(pr, Vector::Zero(5)) - ref.f_star;
    CHECK(objective(pr, x0) - ref.f_star <= 1e-2 * gap0);
}

TEST_CASE("Lyapunov sandwich holds along a warm-started trace")
{
    const Problem pr = shom::test::logistic_problem(5, 50, 1e-2, 12);
    const Reference ref = reference_solution(pr);
    SolverConfig cfg;
    cfg.tau = 5;
    cfg.outer_iters = 40;
    cfg.reference = ref;
    cfg.record_lyapunov = true;
    cfg.inner.grad_tol = 1e-12;
    cfg.x0 = warm_start(pr, ref, 1e-2);
    const RunTrace tr = run_shom(pr, cfg);
    const double lh = default_mp(pr, 2) + lipschitz_estimate_max(pr, 2);
    const ReportEntry e = check_lyapunov_sandwich(tr, ref, pr.lambda, 2.0, lh, 2, 1e-12);
    CHECK(e.pass);
}

TEST_CASE("brute force agrees with the inner solver on tiny instances")
{
    std::mt19937_64 rng(13);
    for (int t = 0; t < 6; ++t) {
        const Index n = 1 + t % 2;
        const Matrix a = shom::test::random_matrix(3, n, rng);
        const Problem pr(dataset_from_dense(a, LossKind::logistic), 0.05);
        const int p = 1 + t % 3;
        SurrogateModel m(pr, p, default_mp(pr, p), random_vector(n, rng));
        const std::vector<Index> b{1};
        m.refresh(b, random_vector(n, rng));
        InnerConfig cfg;
        cfg.grad_tol = 1e-12;
        const InnerResult r = minimize_surrogate(m, Vector::Zero(n), cfg);
        const Vector bf = brute_force_minimize([&](const Vector& y) { return m.value(y); }, Vector::Zero(n), 5.0);
        CHECK((bf - r.minimizer).norm() <= 1e-4);
    }
}

TEST_CASE("superlinear ratios read from a trace")
{
    RunTrace tr;
    double gap = 1e-1;
    for (long k = 0; k < 5; ++k) {
        TraceRow r;
        r.k = k;
        r.f = 1.0 + gap;
        tr.rows.push_back(r);
        gap = 2.0 * std::pow(gap, 1.5);
    }
    const auto ratios = superlinear_ratios(tr, 1.0, 1.5, 1e-14);
    REQUIRE(!ratios.empty());
    for (double q : ratios) CHECK(q == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("synthetic generators produce LIBSVM text")
{
    std::ostringstream a8a, madelon;
    write_a8a_like(a8a, 5, 1);
    write_madelon_like(madelon, 3, 1);
    std::istringstream in(a8a.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK((line.rfind("+1 ", 0) == 0 || line.rfind("-1 ", 0) == 0));
    }
    CHECK(lines == 5);
    const std::string text = madelon.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
