#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "unprompt/types.hpp"

namespace unprompt {

using Edge = std::pair<Index, Index>;
using Labels = Eigen::VectorXi;

// Undirected attributed graph. The adjacency is a binary CSR matrix with both
// directions materialized; no self-loops, no duplicates.
struct AttributedGraph {
    SparseMatrix adjacency;
    Matrix attributes;
    std::optional<Labels> labels;

    Index num_nodes() const { return attributes.rows(); }
    Index num_attributes() const { return attributes.cols(); }
    Index num_edges() const { return adjacency.nonZeros() / 2; }
    Index degree(Index node) const {
        return adjacency.outerIndexPtr()[node + 1] - adjacency.outerIndexPtr()[node];
    }
    // Undirected edges with u < v, sorted.
    std::vector<Edge> edge_list() const;
    Index num_anomalies() const { return labels ? labels->sum() : 0; }
};

// Builds a validated graph. Edges are symmetrized and deduplicated; self-loops
// are dropped. Throws MalformedGraph for out-of-range endpoints, Shape for a
// label vector of the wrong length and Label for values outside {0,1}.
AttributedGraph make_graph(Matrix attributes, const std::vector<Edge>& edges,
                           std::optional<Labels> labels = std::nullopt);

// Symmetric binary CSR adjacency from an edge list (same validation rules).
SparseMatrix build_adjacency(Index num_nodes, const std::vector<Edge>& edges);

// Ã = D⁻¹A. Rows of isolated nodes stay all-zero.
struct RowNormalizedAdjacency {
    SparseMatrix matrix;
    Eigen::Array<bool, Eigen::Dynamic, 1> isolated;

    Index size() const { return matrix.rows(); }
};

RowNormalizedAdjacency row_normalize(const SparseMatrix& adjacency);
inline RowNormalizedAdjacency row_normalize(const AttributedGraph& g) {
    return row_normalize(g.adjacency);
}

// Exact sparse-dense product; Shape error when the inner dimensions differ.
Matrix sparse_matmul(const RowNormalizedAdjacency& adj, const Matrix& m);

// Throws NonFinite if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

// File ingestion. Edge files hold two integer columns (comma or whitespace
// separated, optional `src,dst` header); attribute files one CSV row per node;
// label files one 0/1 integer per line.
AttributedGraph load_graph(const std::filesystem::path& edge_path,
                           const std::filesystem::path& attr_path,
                           const std::optional<std::filesystem::path>& label_path = std::nullopt);

// Dataset directory: edges.csv, attrs.csv and, optionally, labels.csv.
AttributedGraph load_dataset(const std::filesystem::path& dir);
void save_dataset(const AttributedGraph& g, const std::filesystem::path& dir);

}  // namespace unprompt
