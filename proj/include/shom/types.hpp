#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shom {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, Index>;

using ConstVectorRef = Eigen::Ref<const Vector>;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    DimensionError(const std::string& what, Index expected, Index got)
        : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
                std::to_string(got)) {}
};

/// Non-finite argument or value outside a function's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

inline void require_dim(const char* what, Index expected, Index got)
{
    if (expected != got) throw DimensionError(what, expected, got);
}

}  // namespace shom
