#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <cstdint>

namespace unprompt {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

// Everything trained or scored by this library runs in double precision.
using Real = double;
using Matrix = MatrixX<Real>;
using Vector = VectorX<Real>;
using RowVector = RowVectorX<Real>;
using SparseMatrix = SparseRowMatrix<Real>;

}  // namespace unprompt
