#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"
#include "unprompt/error.hpp"
#include "unprompt/synth.hpp"
#include "unprompt/unify.hpp"

using namespace unprompt;
using namespace testing_support;

TEST_SUITE("synth_bench") {

TEST_CASE("anomaly count is exactly the ceiling of rate times N") {
    for (double rate : {0.05, 0.07, 0.1, 0.013}) {
        SynthSpec s;
        s.anomaly_rate = rate;
        s.structural_frac = 0.0;
        const AttributedGraph g = generate(s);
        CHECK(g.num_anomalies() == static_cast<Index>(std::ceil(rate * 400 - 1e-9)));
    }
}

TEST_CASE("same spec gives the same graph") {
    SynthSpec s;
    s.seed = 42;
    const AttributedGraph a = generate(s), b = generate(s);
    CHECK(a.attributes == b.attributes);
    CHECK(a.edge_list() == b.edge_list());
    CHECK(*a.labels == *b.labels);
    s.seed = 43;
    CHECK(generate(s).attributes != a.attributes);
}

TEST_CASE("adjacency is symmetric without self-loops") {
    SynthSpec s;
    s.seed = 3;
    const Matrix a = dense(generate(s).adjacency);
    CHECK(a == a.transpose());
    CHECK(a.diagonal().isZero(0));
}

TEST_CASE("intra-community density matches the spec") {
    SynthSpec s;
    s.num_nodes = 1000;
    s.anomaly_rate = 0.01;
    s.structural_frac = 0.0;
    s.seed = 7;
    const SynthGraph sg = generate_with_communities(s);
    double pairs = 0, hits = 0;
    for (Index u = 0; u < s.num_nodes; ++u)
        for (Index v = u + 1; v < s.num_nodes; ++v)
            if (sg.community(u) == sg.community(v)) {
                pairs += 1;
                hits += sg.graph.adjacency.coeff(u, v);
            }
    const double sigma = std::sqrt(pairs * s.intra_prob * (1 - s.intra_prob));
    CHECK(std::abs(hits - pairs * s.intra_prob) <= 3 * sigma);
}

TEST_CASE("structural anomalies only link to each other, across communities") {
    SynthSpec s;
    s.seed = 5;
    s.structural_frac = 1.0;
    const SynthGraph sg = generate_with_communities(s);
    const AttributedGraph& g = sg.graph;
    int cross = 0;
    for (auto [u, v] : g.edge_list()) {
        CHECK((*g.labels)(u) == (*g.labels)(v));
        if ((*g.labels)(u) == 1 && sg.community(u) != sg.community(v)) ++cross;
    }
    CHECK(cross > 0);
    for (Index i = 0; i < g.num_nodes(); ++i)
        if ((*g.labels)(i) == 1) CHECK(g.degree(i) >= s.clique_size - 1);
}

// Scores with W = I and h = I on the unified attributes, the input the score
// is defined on. The nuisance factors dominate the raw columns, so the gap
// only shows after per-column standardization.
TEST_CASE("normal nodes are more predictable than anomalies") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        SynthSpec s;
        s.num_communities = 4;
        s.seed = seed;
        const AttributedGraph g = generate(s);
        const Matrix x = unify(g, 8).values;
        const Matrix agg = oracle::neighbour_mean(g, x);
        double normal = 0, abnormal = 0;
        for (Index i = 0; i < g.num_nodes(); ++i) ((*g.labels)(i) ? abnormal : normal) += oracle::cosine(x, i, agg, i);
        const double na = static_cast<double>(g.num_anomalies());
        CHECK(normal / (static_cast<double>(g.num_nodes()) - na) > abnormal / na);
    }
}

TEST_CASE("default pair unifies to a shared dimensionality") {
    const auto [sa, sb] = default_pair_specs(0);
    CHECK(sa.raw_dim == 64);
    CHECK(sb.raw_dim == 24);
    CHECK(sa.seed != sb.seed);
    const auto [a, b] = generate_pair(sa, sb);
    CHECK(unify(a, 8).values.cols() == 8);
    CHECK(unify(b, 8).values.cols() == 8);
    CHECK(a.num_anomalies() == 20);
    CHECK_THROWS_AS(generate_pair(sa, sa), Error);
}

TEST_CASE("infeasible specs are rejected") {
    SynthSpec s;
    s.num_nodes = 40;
    s.anomaly_rate = 0.1;
    s.clique_size = 5;  // only two structural anomalies
    CHECK_THROWS_AS(generate(s), Error);
    SynthSpec t;
    t.intra_prob = 0.001;
    CHECK_THROWS_AS(generate(t), Error);
    SynthSpec u;
    u.anomaly_rate = 0.6;
    CHECK_THROWS_AS(generate(u), Error);
    SynthSpec v;
    v.raw_dim = 3;
    CHECK_THROWS_AS(generate(v), Error);
}

TEST_CASE("spec json round trip") {
    SynthSpec s;
    s.num_nodes = 123;
    s.attr_offset = -2.5;
    s.seed = 9;
    const SynthSpec back = synth_spec_from_json(nlohmann::json(to_json(s)));
    CHECK(to_json(back) == to_json(s));
    CHECK_THROWS_AS(synth_spec_from_json(nlohmann::json{{"nodes", 3}}), Error);
}

}
