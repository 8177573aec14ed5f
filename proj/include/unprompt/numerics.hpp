#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "unprompt/error.hpp"
#include "unprompt/types.hpp"

namespace unprompt {

// Vectors shorter than this are treated as zero in every similarity.
inline constexpr double kZeroNorm = 1e-12;

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size())
        throw Error(ErrorKind::Shape, "cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                                          std::to_string(b.size()) + " differ");
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (na < kZeroNorm || nb < kZeroNorm) return Scalar(0);
    const Scalar dot = a.reshaped().dot(b.reshaped());
    return std::clamp(dot / (na * nb), Scalar(-1), Scalar(1));
}

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = logits.maxCoeff();
    VectorX<Scalar> e = (logits.reshaped().array() - shift).exp().matrix();
    return e / e.sum();
}

// Softmax applied to every row independently.
template <typename Derived>
MatrixX<typename Derived::Scalar> row_softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const Scalar shift = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - shift).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

// Backward of row_softmax: given probabilities and dL/dprob, returns dL/dlogit.
template <typename Scalar>
MatrixX<Scalar> row_softmax_backward(const MatrixX<Scalar>& prob, const MatrixX<Scalar>& grad_prob) {
    const VectorX<Scalar> inner = (prob.array() * grad_prob.array()).rowwise().sum().matrix();
    return (prob.array() * (grad_prob.colwise() - inner).array()).matrix();
}

// log(sum(exp(x))) with max subtraction.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = x.maxCoeff();
    return shift + std::log((x.array() - shift).exp().sum());
}

// Unit-normalized rows plus the norms used, with zero rows left at zero.
template <typename Scalar>
struct NormalizedRows {
    MatrixX<Scalar> unit;
    VectorX<Scalar> norms;
};

template <typename Derived>
NormalizedRows<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    NormalizedRows<Scalar> out{MatrixX<Scalar>::Zero(m.rows(), m.cols()), m.rowwise().norm()};
    for (Index i = 0; i < m.rows(); ++i)
        if (out.norms(i) >= kZeroNorm) out.unit.row(i) = m.row(i) / out.norms(i);
    return out;
}

// d(row / ‖row‖): (g − u (u·g)) / ‖row‖, and zero for zero-norm rows.
template <typename Scalar>
MatrixX<Scalar> normalize_rows_backward(const NormalizedRows<Scalar>& fwd, const MatrixX<Scalar>& grad_unit) {
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(grad_unit.rows(), grad_unit.cols());
    for (Index i = 0; i < grad_unit.rows(); ++i) {
        if (fwd.norms(i) < kZeroNorm) continue;
        const Scalar proj = fwd.unit.row(i).dot(grad_unit.row(i));
        out.row(i) = (grad_unit.row(i) - proj * fwd.unit.row(i)) / fwd.norms(i);
    }
    return out;
}

// Cosine similarity between matching rows of a and b.
template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar> rowwise_cosine(const Eigen::MatrixBase<DerivedA>& a,
                                                  const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorKind::Shape, "rowwise_cosine: operand shapes differ");
    VectorX<Scalar> out(a.rows());
    for (Index i = 0; i < a.rows(); ++i) out(i) = cosine_similarity(a.row(i), b.row(i));
    return out;
}

template <typename Scalar>
struct TruncatedSvd {
    MatrixX<Scalar> basis;      // d × k, top-k right singular vectors
    MatrixX<Scalar> projected;  // N × k, x · basis
    VectorX<Scalar> singular_values;
};

// Flips each column so that its largest-magnitude entry is positive (the
// first one wins on exact ties).
template <typename Scalar>
void canonicalize_signs(MatrixX<Scalar>& basis) {
    for (Index j = 0; j < basis.cols(); ++j) {
        Index arg = 0;
        basis.col(j).cwiseAbs().maxCoeff(&arg);
        if (basis(arg, j) < Scalar(0)) basis.col(j) = -basis.col(j);
    }
}

// Top-k right singular vectors of x. Rank error unless 1 ≤ k ≤ min(N, d).
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> truncated_svd(const Eigen::MatrixBase<Derived>& x, Index k) {
    using Scalar = typename Derived::Scalar;
    const Index limit = std::min(x.rows(), x.cols());
    if (k < 1 || k > limit)
        throw Error(ErrorKind::Rank, "truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                                         std::to_string(limit) + "]");
    Eigen::BDCSVD<MatrixX<Scalar>> svd(x.eval(), Eigen::ComputeThinV);
    TruncatedSvd<Scalar> out;
    out.basis = svd.matrixV().leftCols(k);
    canonicalize_signs(out.basis);
    out.projected = x * out.basis;
    out.singular_values = svd.singularValues().head(k);
    return out;
}

}  // namespace unprompt
