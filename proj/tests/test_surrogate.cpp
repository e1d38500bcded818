#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace shom;
using shom::test::random_vector;

namespace {

// Direct summation over functions with anchors tracked by the test.
struct NaiveSurrogate {
    const Problem& problem;
    int p;
    double mp;
    std::vector<Vector> anchor;

    double value(const Vector& y) const
    {
        const Matrix a = Matrix(problem.data.rows());
        const Index n_rows = a.rows();
        double fact[] = {1, 1, 2, 6, 24};
        double sum = 0.0;
        for (Index j = 0; j < n_rows; ++j) {
            const Vector& x = anchor[static_cast<std::size_t>(j)];
            const double b = problem.data.offsets()[j];
            const double t = a.row(j).dot(x) - b;
            const double u = a.row(j).dot(y - x);
            const auto d = scalar_derivatives(problem.data.loss(), t, p);
            for (int l = 0; l <= p; ++l) sum += d[l] / fact[l] * std::pow(u, l);
            sum += mp / fact[p + 1] * std::pow((y - x).norm(), p + 1);
        }
        return sum / n_rows + 0.5 * problem.lambda * y.squaredNorm();
    }
};

}  // namespace

TEST_CASE("surrogate equals f at a common anchor")
{
    const Problem pr = shom::test::logistic_problem(4, 30, 0.1, 1);
    std::mt19937_64 rng(2);
    for (int p = 1; p <= 3; ++p) {
        const Vector x0 = random_vector(4, rng);
        const SurrogateModel m(pr, p, default_mp(pr, p), x0);
        CHECK(m.value(x0) == doctest::Approx(objective(pr, x0)).epsilon(1e-14));
        CHECK((m.gradient(x0) - gradient(pr, x0)).norm() <= 1e-14);
        if (p >= 2) CHECK((m.hessian(x0) - hessian(pr, x0)).norm() <= 1e-13);
    }
}

TEST_CASE("model agrees with a direct summation over anchors")
{
    for (LossKind loss : {LossKind::logistic, LossKind::squared}) {
        const Problem pr = loss == LossKind::logistic ? shom::test::logistic_problem(5, 25, 0.05, 3)
                                                      : shom::test::quadratic_problem(5, 25, 0.05, 3);
        for (int p = 1; p <= 3; ++p) {
            std::mt19937_64 rng(10 + p);
            const double mp = 0.7;
            const Vector x0 = random_vector(5, rng);
            SurrogateModel model(pr, p, mp, x0, MomentMode::enabled);
            NaiveSurrogate naive{pr, p, mp, std::vector<Vector>(25, x0)};
            MinibatchSampler sampler(25, 6, 4);
            for (int it = 0; it < 12; ++it) {
                const Vector x = random_vector(5, rng);
                const auto batch = sampler.sample();
                model.refresh(batch, x);
                for (Index j : batch) naive.anchor[static_cast<std::size_t>(j)] = x;
            }
            model.anchors().check_invariants();
            for (int s = 0; s < 5; ++s) {
                const Vector y = random_vector(5, rng);
                const double ref = naive.value(y);
                CHECK(model.value(y) == doctest::Approx(ref).epsilon(1e-12));
                CHECK(model.fast_value(y) == doctest::Approx(ref).epsilon(1e-10));
                CHECK((model.fast_gradient(y) - model.gradient(y)).norm() <= 1e-10 * (1 + model.gradient(y).norm()));
                CHECK((model.fast_hessian(y) - model.hessian(y)).norm() <= 1e-10 * (1 + model.hessian(y).norm()));
            }
        }
    }
}

TEST_CASE("surrogate derivatives agree with finite differences")
{
    const Problem pr = shom::test::logistic_problem(4, 20, 0.1, 5);
    std::mt19937_64 rng(6);
    for (int p = 1; p <= 3; ++p) {
        SurrogateModel model(pr, p, default_mp(pr, p), random_vector(4, rng));
        MinibatchSampler sampler(20, 5, 7);
        for (int it = 0; it < 4; ++it) model.refresh(sampler.sample(), random_vector(4, rng));
        const double err = finite_difference_check([&](const Vector& y) { return model.value(y); },
                                                   [&](const Vector& y) { return model.gradient(y); },
                                                   Vector::Zero(4), 1.0, 10, 8);
        CHECK(err <= 1e-6);

        const Vector y = random_vector(4, rng);
        const Matrix h = model.hessian(y);
        for (Index j = 0; j < 4; ++j) {
            Vector e = Vector::Zero(4);
            e[j] = 1e-6;
            const Vector col = (model.gradient(y + e) - model.gradient(y - e)) / 2e-6;
            CHECK((col - h.col(j)).norm() <= 1e-6 * (1 + h.norm()));
        }
    }
}

TEST_CASE("squared loss with p = 2 and M = 0 reproduces f")
{
    const Problem pr = shom::test::quadratic_problem(3, 15, 0.1, 9);
    std::mt19937_64 rng(10);
    SurrogateModel model(pr, 2, 0.0, random_vector(3, rng));
    MinibatchSampler sampler(15, 4, 11);
    for (int it = 0; it < 5; ++it) model.refresh(sampler.sample(), random_vector(3, rng));
    const ErrorView view{model};
    for (int s = 0; s < 20; ++s) {
        const Vector y = random_vector(3, rng, 5.0);
        CHECK(std::abs(error_value(view, y)) <= 1e-11 * (1 + objective(pr, y)));
        CHECK(error_gradient(view, y).norm() <= 1e-11 * (1 + gradient(pr, y).norm()));
    }
}

TEST_CASE("anchor bookkeeping keeps refcounts consistent")
{
    const Problem pr = shom::test::logistic_problem(3, 10, 0.1, 12);
    AnchorState st = init_anchors(pr, Vector::Zero(3), 2);
    CHECK(st.distinct() == 1);
    CHECK(st.table().begin()->second.refcount == 10);

    const Vector x1 = Vector::Ones(3);
    const std::vector<Index> b1{1, 3, 5};
    update_anchors(st, pr, b1, x1);
    st.check_invariants();
    CHECK(st.distinct() == 2);

    // bit-equal point reuses its record
    const std::vector<Index> b2{0, 2};
    update_anchors(st, pr, b2, x1);
    st.check_invariants();
    CHECK(st.distinct() == 2);
    CHECK(st.anchor_of(0).refcount == 5);

    // moving every function off the origin drops its record
    const std::vector<Index> rest{4, 6, 7, 8, 9};
    update_anchors(st, pr, rest, x1);
    st.check_invariants();
    CHECK(st.distinct() == 1);
    CHECK(st.anchor_of(9).refcount == 10);

    CHECK(st.predictors()[4] == doctest::Approx(Vector(pr.data.rows().row(4)).sum()));
}

TEST_CASE("anchor updates reject bad batches")
{
    const Problem pr = shom::test::logistic_problem(3, 10, 0.1, 13);
    SurrogateModel model(pr, 2, 1.0, Vector::Zero(3), MomentMode::enabled);
    const Vector x = Vector::Ones(3);
    const std::vector<Index> empty;
    const std::vector<Index> oob{2, 10};
    const std::vector<Index> neg{-1};
    const std::vector<Index> dup{3, 3};
    CHECK_THROWS_AS(model.refresh(empty, x), DomainError);
    CHECK_THROWS_AS(model.refresh(oob, x), std::out_of_range);
    CHECK_THROWS_AS(model.refresh(neg, x), std::out_of_range);
    CHECK_THROWS_AS(model.refresh(dup, x), DomainError);
    CHECK_THROWS_AS(model.refresh(std::vector<Index>{1}, Vector::Ones(2)), DimensionError);
    model.anchors().check_invariants();
    // failed updates leave the moments untouched
    CHECK(model.fast_value(x) == doctest::Approx(model.value(x)).epsilon(1e-13));
    CHECK_THROWS_AS(SurrogateModel(pr, 4, 1.0, Vector::Zero(3)), DomainError);
    CHECK_THROWS_AS(SurrogateModel(pr, 2, -1.0, Vector::Zero(3)), DomainError);
}

TEST_CASE("moments survive many refreshes and resyncs")
{
    const Problem pr = shom::test::logistic_problem(4, 12, 0.1, 14);
    std::mt19937_64 rng(15);
    SurrogateModel model(pr, 3, 1.0, random_vector(4, rng), MomentMode::enabled);
    MinibatchSampler sampler(12, 5, 16);
    for (int it = 0; it < 300; ++it) model.refresh(sampler.sample(), random_vector(4, rng));
    const Vector y = random_vector(4, rng);
    CHECK(model.fast_value(y) == doctest::Approx(model.value(y)).epsilon(1e-10));
}

TEST_CASE("regularizer keeps relative accuracy next to a large anchor")
{
    const Problem pr = shom::test::logistic_problem(4, 12, 0.1, 18);
    const Vector x0 = Vector::Constant(4, 100.0);
    Vector y = x0;
    y[0] += 1e-7;
    for (int p = 1; p <= 3; ++p) {
        const SurrogateModel m(pr, p, 1.0, x0);
        const double fact[] = {1, 1, 2, 6, 24};
        const double ref = std::pow(1e-7, p + 1) / fact[p + 1];
        CHECK(m.regularizer_value(y) == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("default M_p")
{
    const Problem pr = shom::test::logistic_problem(4, 12, 0.1, 17);
    CHECK(default_mp(pr, 1) == lipschitz_estimate(pr, 1));
    CHECK(default_mp(pr, 2) == 2 * lipschitz_estimate(pr, 2));
    CHECK(default_mp(pr, 3) == 3 * lipschitz_estimate(pr, 3));
}

TEST_CASE("surrogate majorizes f with the default constant")
{
    const Problem pr = shom::test::logistic_problem(3, 15, 0.01, 18);
    std::mt19937_64 rng(19);
    for (int p = 1; p <= 3; ++p) {
        SurrogateModel model(pr, p, default_mp(pr, p), random_vector(3, rng));
        MinibatchSampler sampler(15, 4, 20);
        for (int it = 0; it < 3; ++it) model.refresh(sampler.sample(), random_vector(3, rng));
        const ErrorView view{model};
        for (int s = 0; s < 500; ++s) CHECK(error_value(view, random_vector(3, rng, 3.0)) >= -1e-12);
    }
}
