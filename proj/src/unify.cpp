#include "unprompt/unify.hpp"

#include <algorithm>
#include <string>

#include "unprompt/error.hpp"
#include "unprompt/numerics.hpp"

namespace unprompt {

Vector column_means(const Matrix& m) {
    if (m.rows() == 0) throw Error(ErrorKind::Shape, "column statistics of an empty matrix");
    return m.colwise().mean().transpose();
}

Vector column_stds(const Matrix& m) {
    const Vector mean = column_means(m);
    const Matrix centered = m.rowwise() - mean.transpose();
    return (centered.colwise().squaredNorm() / static_cast<Real>(m.rows())).cwiseSqrt().transpose();
}

UnifiedAttributes unify(const Matrix& attributes, Index d_prime, const UnifyOptions& options) {
    const Index n = attributes.rows();
    const Index d = attributes.cols();
    if (d_prime < 1) throw Error(ErrorKind::Rank, "d_prime must be at least 1");
    if (d_prime > n)
        throw Error(ErrorKind::Rank, "d_prime " + std::to_string(d_prime) + " exceeds node count " +
                                         std::to_string(n));
    require_finite(attributes, "attributes");

    Matrix padded = Matrix::Zero(n, std::max(d, d_prime));
    padded.leftCols(d) = attributes;

    auto svd = truncated_svd(padded, d_prime);

    UnifiedAttributes out;
    out.basis = std::move(svd.basis);
    out.d_prime = d_prime;
    out.original_dim = d;
    out.normalized = options.normalize;
    if (!options.normalize) {
        out.values = std::move(svd.projected);
        out.col_mean = Vector::Zero(d_prime);
        out.col_std = Vector::Ones(d_prime);
        return out;
    }

    out.col_mean = column_means(svd.projected);
    const Vector raw_std = column_stds(svd.projected);
    out.col_std = raw_std.cwiseMax(kStdFloor);
    out.values.resize(n, d_prime);
    for (Index j = 0; j < d_prime; ++j) {
        if (raw_std(j) < kStdFloor) {
            out.values.col(j).setZero();
        } else {
            out.values.col(j) = (svd.projected.col(j).array() - out.col_mean(j)) / out.col_std(j);
        }
    }
    return out;
}

Vector distribution_vector(const Matrix& attrs) {
    Vector out(2 * attrs.cols());
    out << column_means(attrs), column_stds(attrs);
    return out;
}

double distribution_similarity(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw Error(ErrorKind::Shape, "distribution_similarity: dimensionalities " + std::to_string(a.cols()) +
                                          " and " + std::to_string(b.cols()) + " differ");
    return cosine_similarity(distribution_vector(a), distribution_vector(b));
}

}  // namespace unprompt
