#pragma once

#include <functional>
#include <vector>

#include "unprompt/graph.hpp"
#include "unprompt/rng.hpp"
#include "unprompt/types.hpp"
#include "unprompt/unify.hpp"

namespace unprompt {

struct AugmentationConfig {
    double edge_removal_prob = 0.2;
    double attr_mask_prob = 0.3;

    void validate() const;
};

struct PretrainConfig {
    int epochs = 200;
    double learning_rate = 1e-3;
    double temperature = 0.5;
    Index head_width = 0;  // 0 means the hidden width of the encoder

    void validate() const;
};

// Edge-dropped adjacency (binary, symmetric) and attribute matrix with one
// shared column mask.
struct CorruptedView {
    SparseMatrix adjacency;
    Matrix attributes;
    Eigen::Array<bool, Eigen::Dynamic, 1> kept_columns;
};

// Drops each undirected edge with edge_removal_prob (both directions
// together) and zeroes each attribute column with attr_mask_prob.
CorruptedView augment(const AttributedGraph& g, const UnifiedAttributes& unified, const AugmentationConfig& cfg,
                      Rng& rng);
CorruptedView augment(const SparseMatrix& adjacency, const Matrix& attributes, const AugmentationConfig& cfg,
                      Rng& rng);

struct ContrastiveResult {
    double loss = 0.0;
    Matrix grad_view1;
    Matrix grad_view2;
};

// Symmetrized InfoNCE over node pairs. view1 holds the anchors ẑ′ of the
// corrupted graph, view2 the original z′. For each anchor the positive is the
// same node in the other view; negatives are every other node of both views.
ContrastiveResult contrastive_loss_with_grad(const Matrix& view1, const Matrix& view2, double temperature);
double contrastive_loss(const Matrix& view1, const Matrix& view2, double temperature);

// Two affine maps with an ELU between them.
struct ProjectionHead {
    Matrix w1, b1, w2, b2;

    static ProjectionHead init(Index in_width, Index width, Rng& rng);
    Matrix apply(const Matrix& x) const;
};

struct PretrainGradients {
    double loss = 0.0;
    Matrix weight;
    ProjectionHead head;  // gradients, same layout as the head
};

// Full pretraining objective for one (original, corrupted) pair; used by the
// training loop and by gradient checks.
PretrainGradients pretrain_objective(const RowNormalizedAdjacency& original_adj, const Matrix& original_attrs,
                                     const RowNormalizedAdjacency& corrupted_adj, const Matrix& corrupted_attrs,
                                     const Matrix& weight, const ProjectionHead& head, double temperature);

struct PretrainResult {
    Matrix weight;
    std::vector<double> loss_history;  // loss at each epoch before the update
    ProjectionHead head;               // discarded by the pipeline, kept for diagnostics
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Contrasts one freshly corrupted view against the original graph each epoch
// and updates W and the projection head with Adam. The head is discarded.
// Throws NonFinite if the loss diverges.
PretrainResult pretrain(const AttributedGraph& g, const UnifiedAttributes& unified, const AugmentationConfig& aug,
                        const PretrainConfig& cfg, const Matrix& initial_weight, Rng& rng,
                        const EpochCallback& on_epoch = {});

}  // namespace unprompt
