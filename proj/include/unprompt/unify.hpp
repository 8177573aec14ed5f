#pragma once

#include "unprompt/graph.hpp"
#include "unprompt/types.hpp"

namespace unprompt {

inline constexpr Index kDefaultDPrime = 8;
// Floor applied to column standard deviations.
inline constexpr double kStdFloor = 1e-8;

// Attributes of one graph mapped into the shared d′-dimensional space.
struct UnifiedAttributes {
    Matrix values;      // X̄, N × d′
    Matrix basis;       // padded d × d′ projection basis
    Vector col_mean;    // column means of the projected attributes
    Vector col_std;     // population std, clamped at kStdFloor
    Index d_prime = 0;
    Index original_dim = 0;
    bool normalized = true;

    Index num_nodes() const { return values.rows(); }
};

struct UnifyOptions {
    // When false the projected attributes are returned without standardization.
    bool normalize = true;
};

// Zero-pads to d′ columns when d < d′, projects onto the top-d′ right singular
// vectors, then standardizes each column with its population mean and std.
// Every graph is unified on its own. Rank error when d′ < 1 or d′ > N.
UnifiedAttributes unify(const Matrix& attributes, Index d_prime, const UnifyOptions& options = {});
inline UnifiedAttributes unify(const AttributedGraph& g, Index d_prime, const UnifyOptions& options = {}) {
    return unify(g.attributes, d_prime, options);
}

Vector column_means(const Matrix& m);
// Population (1/N) standard deviation, unclamped.
Vector column_stds(const Matrix& m);

// [column means, column stds], length 2·cols.
Vector distribution_vector(const Matrix& attrs);

// Cosine similarity of the two distribution vectors; Shape error when the
// column counts differ.
double distribution_similarity(const Matrix& a, const Matrix& b);

}  // namespace unprompt
