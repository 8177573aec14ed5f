#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "unprompt/graph.hpp"
#include "unprompt/model.hpp"
#include "unprompt/rng.hpp"
#include "unprompt/types.hpp"
#include "unprompt/unify.hpp"

namespace unprompt {

struct PromptTrainConfig {
    int epochs = 900;
    double learning_rate = 1e-3;
    // Class-balanced mean instead of the plain sum over nodes.
    bool balanced = false;
    // Ablation switches: freeze P and the token projections at zero, or drop h.
    bool train_prompt = true;
    bool use_transform = true;

    void validate() const;
};

struct UnsupConfig {
    double threshold_percentile = 40.0;
    double alpha = 10.0;
    // The regularizer sums N−1 negatives per node; keeping λ·(N−1) below one
    // stops it from overpowering the weighted positive term.
    double lambda = 1e-3;
    // The regularizer is evaluated exactly up to this many nodes and estimated
    // from `negative_sample_cap` sampled negatives per node above it.
    Index exact_threshold = 5000;
    Index negative_sample_cap = 256;

    void validate() const;
};

// Σ −s_i over normal nodes plus Σ s_i over anomalies (or the class-balanced
// means). Label error for values outside {0,1}; Shape error on length mismatch.
double supervised_prompt_loss(const Vector& scores, const Labels& labels, bool balanced = false);

// Linear-interpolation percentile, p in [0, 100].
double percentile(const Vector& values, double p);

// w_i = sigmoid(α (s_i − t)) with t the configured percentile of the scores.
Vector pseudo_weights(const Vector& scores, const UnsupConfig& cfg);

// Sampled negative indices per node, none equal to the node itself.
using NegativeSamples = std::vector<std::vector<Index>>;
NegativeSamples sample_negatives(Index num_nodes, Index per_node, Rng& rng);

struct EmbeddingLoss {
    double loss = 0.0;
    Matrix grad_z;
    Matrix grad_z_agg;
};

// Σ_i (−w_i sim(z_i, z̃_i) + λ Σ_{j≠i} sim(z_i, z̃_j)). With `negatives` the
// inner sum runs over the sampled j only, scaled by (N−1)/|sample|.
EmbeddingLoss unsupervised_loss(const Matrix& z, const Matrix& z_agg, const Vector& weights, double lambda,
                                const NegativeSamples* negatives = nullptr);

// Supervised objective on embeddings (scores taken as row cosines).
EmbeddingLoss supervised_embedding_loss(const Matrix& z, const Matrix& z_agg, const Labels& labels, bool balanced);

struct TrainLogEntry {
    int epoch = 0;
    double loss = 0.0;
    double mean_normal = 0.0;    // supervised only
    double mean_abnormal = 0.0;  // supervised only
    double mean_weighted = 0.0;  // unsupervised only
};

struct PromptTrainResult {
    GeneralistModel model;
    std::vector<TrainLogEntry> log;  // one entry per epoch, before its update
    Vector final_scores;             // scores of the training graph after training
    Vector weights;                  // pseudo-weights (unsupervised only)
};

using TrainCallback = std::function<void(const TrainLogEntry&)>;

// Keeps W frozen and tunes P, the token projections and h with Adam on the
// supervised objective. `model` supplies W and the starting prompt parameters.
// Label error when labels are missing or hold a single class.
PromptTrainResult train_prompts(const AttributedGraph& g, const UnifiedAttributes& unified,
                                const GeneralistModel& model, const PromptTrainConfig& cfg,
                                const TrainCallback& on_epoch = {});

// Pseudo-labelled variant: weights come once from the pretrained scorer, then
// P, the token projections and h minimize unsupervised_loss.
PromptTrainResult train_unsupervised(const AttributedGraph& g, const UnifiedAttributes& unified,
                                     const GeneralistModel& model, const PromptTrainConfig& cfg,
                                     const UnsupConfig& unsup, Rng& rng, const TrainCallback& on_epoch = {});

// Predictability of the bare aggregation network: cos(X̄W, ÃX̄W), no prompt, no h.
Vector pretrained_scores(const RowNormalizedAdjacency& adj, const Matrix& unified, const Matrix& weight);

}  // namespace unprompt
