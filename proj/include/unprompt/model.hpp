#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "unprompt/graph.hpp"
#include "unprompt/rng.hpp"
#include "unprompt/types.hpp"
#include "unprompt/unify.hpp"

namespace unprompt {

enum class Nonlinearity { Relu, Tanh, Identity };

std::string to_string(Nonlinearity f);
Nonlinearity parse_nonlinearity(const std::string& name);

struct ModelShape {
    Index d_prime = kDefaultDPrime;
    Index d_hidden = 128;
    Index num_tokens = 1;

    friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// A pretrained model carries only the aggregation weights; a full model adds
// the prompt tokens, their mixing projections and the transformation layer.
enum class ModelStage { Pretrained, Full };

struct GeneralistModel {
    ModelShape shape;
    ModelStage stage = ModelStage::Full;
    Nonlinearity nonlinearity = Nonlinearity::Relu;
    bool use_transform = true;
    // Whether graphs are standardized column-wise before scoring.
    bool normalize_attributes = true;
    std::uint64_t seed = 0;

    Matrix weight;             // W, d′ × d_h; frozen after pretraining
    Matrix prompt_tokens;      // P, K × d′
    Matrix token_projections;  // row j is w_j, K × d′
    Matrix transform_weight;   // h(z) = f(z·A + b), A is d_h × d_h
    Matrix transform_bias;     // b, 1 × d_h
};

// W and A uniform in ±1/√fan_in; P and the token projections uniform in
// ±1e-2; b zero.
GeneralistModel init_model(const ModelShape& shape, std::uint64_t seed,
                           Nonlinearity nonlinearity = Nonlinearity::Relu);

// Re-draws everything except W from `rng`, keeping the aggregation weights.
void init_prompt_parameters(GeneralistModel& model, Rng& rng);

// Throws Shape when any tensor disagrees with model.shape, NonFinite on NaN/Inf.
void validate(const GeneralistModel& model);

// x̂_i = x̄_i + Σ_j α_ij p_j with α_i = softmax_j(w_j · x̄_i).
Matrix apply_prompt(const Matrix& unified, const GeneralistModel& model);
inline Matrix apply_prompt(const UnifiedAttributes& unified, const GeneralistModel& model) {
    return apply_prompt(unified.values, model);
}

struct NodeEmbeddings {
    Matrix z;      // latent attributes, h(X̂W)
    Matrix z_agg;  // aggregated neighbourhood, h(ÃX̂W); zero rows for isolated nodes
};

// Both branches share W and h. Rows of isolated nodes in z_agg stay zero
// even after the transformation layer.
NodeEmbeddings forward(const RowNormalizedAdjacency& adj, const Matrix& prompted, const GeneralistModel& model,
                       bool use_transform);

// s_i = cos(z_i, z̃_i), zero for zero-norm rows.
Vector predictability_scores(const NodeEmbeddings& emb);

// Intermediates kept for the backward pass.
struct ForwardCache {
    Matrix alpha;       // N × K
    Matrix prompted;    // X̂
    Matrix mixed;       // ÃX̂
    Matrix latent;      // X̂W
    Matrix aggregated;  // ÃX̂W
    Matrix latent_pre;  // pre-activation of h on the latent branch
    Matrix agg_pre;
    NodeEmbeddings out;
};

ForwardCache forward_cached(const RowNormalizedAdjacency& adj, const Matrix& unified, const GeneralistModel& model,
                            bool use_transform);

struct ModelGradients {
    Matrix weight;
    Matrix prompt_tokens;
    Matrix token_projections;
    Matrix transform_weight;
    Matrix transform_bias;
};

// Gradients of a scalar loss given dL/dz and dL/dz̃.
ModelGradients backward(const RowNormalizedAdjacency& adj, const Matrix& unified, const GeneralistModel& model,
                        bool use_transform, const ForwardCache& cache, const Matrix& grad_z,
                        const Matrix& grad_z_agg);

// Elementwise activation and its derivative expressed through the pre-activation.
Matrix activate(Nonlinearity f, const Matrix& pre);
Matrix activate_derivative(Nonlinearity f, const Matrix& pre);

// Model file: text header (schema version, stage, d′, d_h, K, nonlinearity,
// transform and normalization flags, seed, array list, payload size) terminated by a line `end`,
// followed by the arrays as little-endian float64, row-major, in header order.
inline constexpr int kModelSchemaVersion = 1;
void save_model(const GeneralistModel& model, const std::filesystem::path& path);
GeneralistModel load_model(const std::filesystem::path& path);

// FNV-1a digest of shape, flags and parameter bytes, as 16 hex digits.
std::string model_id(const GeneralistModel& model);

}  // namespace unprompt
