#pragma once

#include "shom/verify.hpp"

#include <random>

namespace shom::test {

inline Vector random_vector(Index n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = scale * normal(rng);
    return v;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
    return m;
}

inline Problem logistic_problem(Index n, Index rows, double lambda, std::uint64_t seed, double scale = 1.0)
{
    SyntheticSpec spec;
    spec.kind = SyntheticKind::logistic;
    spec.n = n;
    spec.N = rows;
    spec.lambda = lambda;
    spec.seed = seed;
    spec.scale = scale;
    return make_problem(spec);
}

inline Problem quadratic_problem(Index n, Index rows, double lambda, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.kind = SyntheticKind::quadratic;
    spec.n = n;
    spec.N = rows;
    spec.lambda = lambda;
    spec.seed = seed;
    return make_problem(spec);
}

}  // namespace shom::test
