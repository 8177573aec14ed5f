#include "unprompt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "unprompt/error.hpp"
#include "unprompt/rng.hpp"

namespace unprompt {

Index SynthSpec::num_anomalies() const {
    return static_cast<Index>(std::ceil(anomaly_rate * static_cast<double>(num_nodes) - 1e-9));
}

Index SynthSpec::num_structural() const {
    return static_cast<Index>(std::llround(structural_frac * static_cast<double>(num_anomalies())));
}

void SynthSpec::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Spec, msg); };
    if (num_nodes < 2) fail("num_nodes must be at least 2");
    if (raw_dim < 1) fail("raw_dim must be positive");
    if (num_communities < 1 || num_communities > num_nodes) fail("num_communities must lie in [1, num_nodes]");
    if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) fail("anomaly_rate must lie in (0, 0.5)");
    if (!(intra_prob >= 0.0 && intra_prob <= 1.0 && inter_prob >= 0.0 && inter_prob <= 1.0))
        fail("edge probabilities must lie in [0, 1]");
    if (!(intra_prob > inter_prob)) fail("intra_prob must exceed inter_prob");
    if (!(structural_frac >= 0.0 && structural_frac <= 1.0)) fail("structural_frac must lie in [0, 1]");
    if (clique_size < 2) fail("clique_size must be at least 2");
    if (num_structural() > 0 && clique_size > num_structural())
        fail("clique_size " + std::to_string(clique_size) + " exceeds the structural anomaly pool of " +
             std::to_string(num_structural()));
    if (!(noise >= 0.0) || !(separation >= 0.0) || !(nuisance_scale >= 0.0) || !(raw_noise >= 0.0))
        fail("scales must be non-negative");
    if (!(factor_decay > 0.0 && factor_decay <= 1.0)) fail("factor_decay must lie in (0, 1]");
    if (!(contextual_shift >= 0.0)) fail("contextual_shift must be non-negative");
    if (nuisance_dims < 0) fail("nuisance_dims must be non-negative");
    if (latent_dim() > raw_dim)
        fail("raw_dim " + std::to_string(raw_dim) + " cannot hold " + std::to_string(latent_dim()) +
             " latent factors");
}

nlohmann::ordered_json to_json(const SynthSpec& s) {
    return {{"num_nodes", s.num_nodes},
            {"raw_dim", s.raw_dim},
            {"num_communities", s.num_communities},
            {"intra_prob", s.intra_prob},
            {"inter_prob", s.inter_prob},
            {"anomaly_rate", s.anomaly_rate},
            {"structural_frac", s.structural_frac},
            {"clique_size", s.clique_size},
            {"separation", s.separation},
            {"noise", s.noise},
            {"nuisance_dims", s.nuisance_dims},
            {"nuisance_scale", s.nuisance_scale},
            {"factor_decay", s.factor_decay},
            {"raw_noise", s.raw_noise},
            {"attr_scale", s.attr_scale},
            {"attr_offset", s.attr_offset},
            {"contextual_shift", s.contextual_shift},
            {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "synth spec must be an object");
    SynthSpec s;
    const auto known = to_json(s);
    for (const auto& [key, value] : doc.items())
        if (!known.contains(key)) throw Error(ErrorKind::Config, "unknown synth spec key '" + key + "'");
    auto take = [&](const char* key, auto& out) {
        if (!doc.contains(key)) return;
        try {
            out = doc.at(key).get<std::decay_t<decltype(out)>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Config, std::string(key) + ": " + e.what());
        }
    };
    take("num_nodes", s.num_nodes);
    take("raw_dim", s.raw_dim);
    take("num_communities", s.num_communities);
    take("intra_prob", s.intra_prob);
    take("inter_prob", s.inter_prob);
    take("anomaly_rate", s.anomaly_rate);
    take("structural_frac", s.structural_frac);
    take("clique_size", s.clique_size);
    take("separation", s.separation);
    take("noise", s.noise);
    take("nuisance_dims", s.nuisance_dims);
    take("nuisance_scale", s.nuisance_scale);
    take("factor_decay", s.factor_decay);
    take("raw_noise", s.raw_noise);
    take("attr_scale", s.attr_scale);
    take("attr_offset", s.attr_offset);
    take("contextual_shift", s.contextual_shift);
    take("seed", s.seed);
    return s;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open synth spec " + path.string());
    try {
        return synth_spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
}

namespace {

// Regular simplex of `c` vertices with the given radius, centred at the
// origin, in Helmert coordinates (c × (c−1)).
Matrix simplex_vertices(Index c, double radius) {
    Matrix v = Matrix::Zero(c, std::max<Index>(c - 1, 0));
    for (Index k = 1; k < c; ++k) {
        const double norm = std::sqrt(static_cast<double>(k * (k + 1)));
        for (Index i = 0; i < k; ++i) v(i, k - 1) = 1.0 / norm;
        v(k, k - 1) = -static_cast<double>(k) / norm;
    }
    if (c > 1) v *= radius / std::sqrt(static_cast<double>(c - 1) / static_cast<double>(c));
    return v;
}

// latent_dim × raw_dim with orthonormal rows, each oriented so its
// largest-magnitude entry is positive.
Matrix embedding_map(Index latent, Index raw, Rng& rng) {
    const Matrix gauss = rng.normal_matrix(raw, latent);
    Eigen::HouseholderQR<Matrix> qr(gauss);
    Matrix map = (qr.householderQ() * Matrix::Identity(raw, latent)).transpose();
    for (Index k = 0; k < latent; ++k) {
        Index arg = 0;
        map.row(k).cwiseAbs().maxCoeff(&arg);
        if (map(k, arg) < 0) map.row(k) *= -1.0;
    }
    return map;
}

}  // namespace

SynthGraph generate_with_communities(const SynthSpec& spec) {
    spec.validate();
    const Index n = spec.num_nodes;
    const Index c = spec.num_communities;
    const Index signal = c - 1;
    const Index latent = spec.latent_dim();
    Rng rng(spec.seed);
    Rng edge_rng = rng.fork(1);
    Rng attr_rng = rng.fork(2);
    Rng anomaly_rng = rng.fork(3);
    Rng map_rng = rng.fork(4);

    SynthGraph out;
    out.community.resize(n);
    for (Index i = 0; i < n; ++i) out.community(i) = static_cast<int>(i % c);

    std::vector<Edge> edges;
    for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v) {
            const double p = out.community(u) == out.community(v) ? spec.intra_prob : spec.inter_prob;
            if (edge_rng.bernoulli(p)) edges.emplace_back(u, v);
        }

    Matrix centres = simplex_vertices(c, spec.separation);
    Vector factor_scale(latent);
    for (Index k = 0; k < signal; ++k) factor_scale(k) = std::pow(spec.factor_decay, static_cast<double>(k));
    for (Index k = 0; k < spec.nuisance_dims; ++k)
        factor_scale(signal + k) = spec.nuisance_scale * std::pow(spec.factor_decay, static_cast<double>(k));
    for (Index k = 0; k < signal; ++k) centres.col(k) *= factor_scale(k);

    Matrix factors = attr_rng.normal_matrix(n, latent, spec.noise);
    for (Index k = 0; k < spec.nuisance_dims; ++k)
        factors.col(signal + k) += attr_rng.normal_matrix(n, 1, factor_scale(signal + k));
    for (Index i = 0; i < n; ++i) factors.row(i).head(signal) += centres.row(out.community(i));

    // Anomaly selection: a random subset, the first `structural` of which are
    // wired into cliques.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<std::size_t>(anomaly_rng.below(i + 1))]);
    const Index total = spec.num_anomalies();
    const Index structural = spec.num_structural();

    Labels labels = Labels::Zero(n);
    std::vector<bool> is_structural(static_cast<std::size_t>(n), false);
    for (Index k = 0; k < total; ++k) labels(order[static_cast<std::size_t>(k)]) = 1;
    for (Index k = 0; k < structural; ++k) is_structural[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

    if (structural > 0) {
        std::erase_if(edges, [&](const Edge& e) {
            return is_structural[static_cast<std::size_t>(e.first)] || is_structural[static_cast<std::size_t>(e.second)];
        });
        // Members sorted by community before dealing them round-robin into
        // cliques, so each clique mixes communities.
        std::vector<Index> members(order.begin(), order.begin() + structural);
        std::stable_sort(members.begin(), members.end(),
                         [&](Index a, Index b) { return out.community(a) < out.community(b); });
        const Index num_cliques = structural / spec.clique_size;
        std::vector<std::vector<Index>> cliques(static_cast<std::size_t>(num_cliques));
        for (std::size_t k = 0; k < members.size(); ++k) cliques[k % cliques.size()].push_back(members[k]);
        for (const auto& clique : cliques)
            for (std::size_t a = 0; a < clique.size(); ++a)
                for (std::size_t b = a + 1; b < clique.size(); ++b) edges.emplace_back(clique[a], clique[b]);
    }

    if (c > 1)
        for (Index k = structural; k < total; ++k) {
            const Index node = order[static_cast<std::size_t>(k)];
            const int own = out.community(node);
            auto other = static_cast<int>(anomaly_rng.below(static_cast<std::uint64_t>(c - 1)));
            if (other >= own) ++other;
            factors.row(node).head(signal) +=
                spec.contextual_shift * (centres.row(other) - centres.row(own));
        }

    const Matrix map = embedding_map(latent, spec.raw_dim, map_rng);
    Matrix attrs = factors * map + map_rng.normal_matrix(n, spec.raw_dim, spec.raw_noise);
    attrs = (spec.attr_scale * attrs).array() + spec.attr_offset;
    out.graph = make_graph(std::move(attrs), edges, std::move(labels));
    return out;
}

std::pair<SynthSpec, SynthSpec> default_pair_specs(std::uint64_t seed) {
    SynthSpec source;
    source.raw_dim = 64;
    source.attr_scale = 1.0;
    source.attr_offset = 3.0;
    source.seed = seed * 2 + 1;

    SynthSpec target;
    target.raw_dim = 24;
    target.attr_scale = 3.0;
    target.attr_offset = -8.0;
    target.seed = seed * 2 + 2;
    return {source, target};
}

std::pair<AttributedGraph, AttributedGraph> generate_pair(const SynthSpec& source, const SynthSpec& target) {
    if (source.raw_dim == target.raw_dim) throw Error(ErrorKind::Spec, "pair specs must differ in raw_dim");
    return {generate(source), generate(target)};
}

}  // namespace unprompt
