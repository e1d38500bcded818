#include "helpers.hpp"
#include "shom/data_io.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace shom;
using shom::test::random_vector;

TEST_CASE("sampler draws sorted distinct indices in range")
{
    MinibatchSampler s(50, 7, 1);
    for (int t = 0; t < 200; ++t) {
        const auto b = s.sample();
        REQUIRE(b.size() == 7);
        CHECK(std::is_sorted(b.begin(), b.end()));
        CHECK(std::set<Index>(b.begin(), b.end()).size() == 7);
        CHECK(b.front() >= 0);
        CHECK(b.back() < 50);
    }
    MinibatchSampler all(9, 9, 2);
    const auto b = all.sample();
    for (Index i = 0; i < 9; ++i) CHECK(b[static_cast<std::size_t>(i)] == i);
    CHECK_THROWS_AS(MinibatchSampler(10, 0, 1), DomainError);
    CHECK_THROWS_AS(MinibatchSampler(10, 11, 1), DomainError);
}

TEST_CASE("sampler inclusion frequencies are uniform")
{
    const Index n = 20, tau = 5;
    const int draws = 20000;
    MinibatchSampler s(n, tau, 3);
    std::vector<int> count(n, 0);
    for (int t = 0; t < draws; ++t)
        for (Index i : s.sample()) ++count[static_cast<std::size_t>(i)];
    const double p = static_cast<double>(tau) / n;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (int c : count) CHECK(std::abs(c - draws * p) <= 5 * sd);
}

TEST_CASE("sampler is reproducible")
{
    MinibatchSampler a(100, 10, 42), b(100, 10, 42), c(100, 10, 43);
    bool differs = false;
    for (int t = 0; t < 20; ++t) {
        const auto x = a.sample();
        CHECK(x == b.sample());
        differs = differs || x != c.sample();
    }
    CHECK(differs);
}

TEST_CASE("solver configuration validation names the field")
{
    SolverConfig cfg;
    cfg.tau = 0;
    CHECK_THROWS_WITH_AS(cfg.validate(10), "tau out of range", DomainError);
    cfg.tau = 11;
    CHECK_THROWS_WITH_AS(cfg.validate(10), "tau out of range", DomainError);
    cfg.tau = 1;
    cfg.p = 4;
    CHECK_THROWS_WITH_AS(cfg.validate(10), "p out of range", DomainError);
    cfg.p = 2;
    cfg.record_lyapunov = true;
    CHECK_THROWS_AS(cfg.validate(10), DomainError);
    CHECK(method_from_string("sgd") == Method::sgd);
    CHECK_THROWS(method_from_string("adam"));
}

TEST_CASE("Lyapunov quantities")
{
    const Problem pr = shom::test::logistic_problem(2, 6, 0.1, 1);
    Vector x(2);
    x << 2.0, 0.0;
    const AnchorState single = init_anchors(pr, x, 2);
    CHECK(lyapunov_W(single, Vector::Zero(2), 2) == doctest::Approx(8.0));

    const Reference ref = reference_solution(pr);
    const AnchorState at_opt = init_anchors(pr, ref.x_star, 2);
    CHECK(lyapunov_phi(at_opt, pr, ref.f_star, 2, 2) <= 1e-20);
    CHECK(lyapunov_W(at_opt, ref.x_star, 2) == 0.0);
    CHECK_THROWS_AS(lyapunov_phi(at_opt, pr, ref.f_star + 1.0, 2, 2), DomainError);

    // random state against a direct sum
    std::mt19937_64 rng(2);
    AnchorState st = init_anchors(pr, Vector::Zero(2), 2);
    std::vector<Vector> anchor(6, Vector::Zero(2));
    MinibatchSampler s(6, 2, 3);
    for (int t = 0; t < 4; ++t) {
        const Vector y = random_vector(2, rng);
        const auto b = s.sample();
        update_anchors(st, pr, b, y);
        for (Index j : b) anchor[static_cast<std::size_t>(j)] = y;
    }
    double phi = 0.0, w = 0.0;
    for (const Vector& a : anchor) {
        phi += std::pow(objective(pr, a) - ref.f_star, 1.5);
        w += std::pow((a - ref.x_star).norm(), 3);
    }
    CHECK(lyapunov_phi(st, pr, ref.f_star, 2, 2) == doctest::Approx(phi / 6).epsilon(1e-12));
    CHECK(lyapunov_W(st, ref.x_star, 2) == doctest::Approx(w / 6).epsilon(1e-12));
}

TEST_CASE("SHOM traces are bit-reproducible")
{
    const Problem pr = shom::test::logistic_problem(5, 40, 0.01, 4);
    SolverConfig cfg;
    cfg.tau = 5;
    cfg.outer_iters = 30;
    cfg.seed = 9;
    cfg.record_time = false;
    auto bytes = [&] {
        std::ostringstream os;
        write_trace(run_shom(pr, cfg), os);
        return os.str();
    };
    CHECK(bytes() == bytes());
}

TEST_CASE("surrogate values descend and sandwich f")
{
    const Problem pr = shom::test::logistic_problem(5, 60, 0.01, 5);
    for (int p = 1; p <= 3; ++p) {
        SolverConfig cfg;
        cfg.p = p;
        cfg.tau = 6;
        cfg.outer_iters = 60;
        cfg.seed = 10 + static_cast<std::uint64_t>(p);
        cfg.inner.grad_tol = 1e-10;
        const RunTrace tr = run_shom(pr, cfg);
        REQUIRE(tr.rows.size() == 61);
        for (std::size_t k = 0; k + 1 < tr.rows.size(); ++k) {
            const TraceRow& r = tr.rows[k];
            CHECK(r.inner_converged == 1);
            // f(x_{k+1}) <= g(x_{k+1}; x^_k)
            CHECK(tr.rows[k + 1].f <= r.surrogate_value + 1e-12);
            if (k > 0) CHECK(r.surrogate_value <= tr.rows[k - 1].surrogate_value + 1e-9);
        }
    }
}

TEST_CASE("deterministic SHOM converges to the reference")
{
    const Problem pr = shom::test::logistic_problem(4, 30, 0.05, 6);
    const Reference ref = reference_solution(pr);
    SolverConfig cfg;
    cfg.tau = 30;
    cfg.outer_iters = 60;
    cfg.inner.grad_tol = 1e-13;
    cfg.reference = ref;
    cfg.target_gap = 1e-13;
    const RunTrace tr = run_shom(pr, cfg);
    CHECK(tr.rows.back().f - ref.f_star <= 1e-13);
    CHECK(tr.rows.size() < 61);
    CHECK((tr.final_x - ref.x_star).norm() <= 1e-5);
}

TEST_CASE("epochs count the initial pass and every refreshed row")
{
    const Problem pr = shom::test::logistic_problem(4, 40, 0.05, 7);
    SolverConfig cfg;
    cfg.tau = 8;
    cfg.outer_iters = 10;
    const RunTrace tr = run_shom(pr, cfg);
    for (const TraceRow& r : tr.rows) CHECK(r.epochs == doctest::Approx(1.0 + r.k * 0.2));

    cfg.moments = MomentMode::disabled;
    const RunTrace rows = run_shom(pr, cfg);
    CHECK(rows.rows.back().epochs > 1.0 + 10 * 0.2 + 10);

    cfg.moments = MomentMode::automatic;
    cfg.outer_iters = 1000;
    cfg.epochs = 3.0;
    const RunTrace budget = run_shom(pr, cfg);
    CHECK(budget.rows.back().epochs >= 3.0);
    CHECK(budget.rows.back().epochs < 3.2 + 1e-9);
}

TEST_CASE("trace_every thins the trace and keeps the last row")
{
    const Problem pr = shom::test::logistic_problem(3, 20, 0.05, 8);
    SolverConfig cfg;
    cfg.tau = 4;
    cfg.outer_iters = 23;
    cfg.trace_every = 5;
    const RunTrace tr = run_shom(pr, cfg);
    std::vector<long> ks;
    for (const auto& r : tr.rows) ks.push_back(r.k);
    CHECK(ks == std::vector<long>{0, 5, 10, 15, 20, 23});
}

TEST_CASE("SGD with a constant step converges linearly on a 1-D quadratic")
{
    Matrix a(3, 1);
    a << 1.0, 2.0, -1.0;
    Vector b(3);
    b << 1.0, 0.5, 2.0;
    const Problem pr(dataset_from_dense(a, LossKind::squared, b), 0.0);
    const Reference ref = reference_solution(pr);
    SolverConfig cfg;
    cfg.method = Method::sgd;
    cfg.tau = 3;
    cfg.outer_iters = 200;
    cfg.sgd_gamma0 = 0.5;  // < 2/L with L = 2
    cfg.sgd_k0 = 1e30;
    const RunTrace tr = run_sgd(pr, cfg);
    CHECK(std::abs(tr.final_x[0] - ref.x_star[0]) <= 1e-12);
}

TEST_CASE("SGD started at the optimum stays close")
{
    const Problem pr = shom::test::logistic_problem(4, 50, 0.05, 9);
    const Reference ref = reference_solution(pr);
    SolverConfig cfg;
    cfg.method = Method::sgd;
    cfg.tau = 5;
    cfg.outer_iters = 200;
    cfg.x0 = ref.x_star;
    cfg.sgd_gamma0 = 0.05;
    const RunTrace tr = run_sgd(pr, cfg);
    CHECK((tr.final_x - ref.x_star).norm() <= 0.2);
}

TEST_CASE("SGD decreases f on average")
{
    const Problem pr = shom::test::logistic_problem(5, 100, 0.01, 10);
    double mean_final = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SolverConfig cfg;
        cfg.method = Method::sgd;
        cfg.tau = 10;
        cfg.outer_iters = 100;
        cfg.seed = seed;
        mean_final += run_sgd(pr, cfg).rows.back().f / 10;
    }
    CHECK(mean_final < objective(pr, Vector::Zero(5)));
}

TEST_CASE("SGD divergence is flagged")
{
    const Problem pr = shom::test::quadratic_problem(3, 20, 0.0, 11);
    SolverConfig cfg;
    cfg.method = Method::sgd;
    cfg.tau = 20;
    cfg.outer_iters = 500;
    cfg.sgd_gamma0 = 50.0;
    cfg.sgd_k0 = 1e30;
    const RunTrace tr = run(pr, cfg);
    CHECK(tr.aborted);
    CHECK(tr.status.find("diverged") != std::string::npos);
}
