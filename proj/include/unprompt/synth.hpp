#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include <nlohmann/json.hpp>

#include "unprompt/graph.hpp"

namespace unprompt {

// Planted-anomaly attributed graph in one artificial "domain".
//
// Attributes come from a latent factor model shared by every domain: C−1
// homophilous community factors (vertices of a regular simplex of radius
// `separation`) followed by `nuisance_dims` factors drawn independently per
// node. Factor k is scaled by factor_decay^k inside its block so the factors
// have distinct variances. A domain embeds the latent space into raw_dim
// columns through its own random orthonormal map, adds raw noise and applies
// x ↦ scale·x + offset.
struct SynthSpec {
    Index num_nodes = 400;
    Index raw_dim = 64;
    Index num_communities = 3;
    double intra_prob = 0.05;
    double inter_prob = 0.005;
    double anomaly_rate = 0.05;
    double structural_frac = 0.5;  // the rest are contextual anomalies
    Index clique_size = 5;
    double separation = 4.0;
    double noise = 0.5;  // within-community std of every latent factor
    Index nuisance_dims = 5;
    double nuisance_scale = 12.0;
    double factor_decay = 0.8;
    double raw_noise = 0.1;
    double attr_scale = 1.0;
    double attr_offset = 0.0;
    // Contextual anomalies move this fraction of the way from their own
    // community centre to another one.
    double contextual_shift = 0.6;
    std::uint64_t seed = 0;

    Index latent_dim() const { return num_communities - 1 + nuisance_dims; }
    Index num_anomalies() const;
    Index num_structural() const;
    void validate() const;
};

nlohmann::ordered_json to_json(const SynthSpec& spec);
// Missing keys keep their defaults; unknown keys are a Config error.
SynthSpec synth_spec_from_json(const nlohmann::json& doc);
SynthSpec load_synth_spec(const std::filesystem::path& path);

struct SynthGraph {
    AttributedGraph graph;
    Eigen::VectorXi community;
};

// Stochastic block model edges and latent-factor attributes. ⌈rate·N⌉ nodes
// become anomalies: structural ones lose their edges and are wired into
// cliques spanning communities, contextual ones take community factors from
// elsewhere. Spec error for infeasible specs.
SynthGraph generate_with_communities(const SynthSpec& spec);
inline AttributedGraph generate(const SynthSpec& spec) { return generate_with_communities(spec).graph; }

// Default cross-domain specs: 400 nodes each, raw_dim 64 vs 24, different
// attribute scales and offsets, independent seeds derived from `seed`.
std::pair<SynthSpec, SynthSpec> default_pair_specs(std::uint64_t seed);

// Spec error unless the two specs differ in raw_dim.
std::pair<AttributedGraph, AttributedGraph> generate_pair(const SynthSpec& source, const SynthSpec& target);

}  // namespace unprompt
