#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "unprompt/graph.hpp"
#include "unprompt/rng.hpp"

namespace testing_support {

using namespace unprompt;

// Erdős–Rényi graph with Gaussian attributes; a few nodes may be isolated.
inline AttributedGraph random_graph(Rng& rng, Index n, Index d, double p) {
    std::vector<Edge> edges;
    for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v)
            if (rng.bernoulli(p)) edges.emplace_back(u, v);
    return make_graph(rng.normal_matrix(n, d), edges);
}

inline Matrix dense(const SparseMatrix& m) { return Matrix(m); }

// Per-test scratch directory, wiped on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("unprompt_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
