#include "unprompt/prompt_train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unprompt/error.hpp"
#include "unprompt/numerics.hpp"
#include "unprompt/optimizer.hpp"

namespace unprompt {

void PromptTrainConfig::validate() const {
    if (epochs < 0) throw Error(ErrorKind::Config, "prompt epochs must be non-negative");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "prompt learning rate must be positive");
}

void UnsupConfig::validate() const {
    if (!(threshold_percentile > 0.0 && threshold_percentile < 100.0))
        throw Error(ErrorKind::Config, "threshold percentile must lie in (0, 100)");
    if (!(alpha > 0.0)) throw Error(ErrorKind::Config, "alpha must be positive");
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be non-negative");
    if (negative_sample_cap < 1) throw Error(ErrorKind::Config, "negative_sample_cap must be positive");
}

namespace {

void check_labels(const Vector& scores, const Labels& labels) {
    if (scores.size() != labels.size())
        throw Error(ErrorKind::Shape, "scores and labels have different lengths");
    for (Index i = 0; i < labels.size(); ++i)
        if (labels(i) != 0 && labels(i) != 1)
            throw Error(ErrorKind::Label, "label of node " + std::to_string(i) + " is not 0/1");
}

// dL/ds_i of the supervised objective.
Vector supervised_coefficients(const Labels& labels, bool balanced) {
    const Index n = labels.size();
    const Index abnormal = labels.sum();
    const Index normal = n - abnormal;
    Vector c(n);
    for (Index i = 0; i < n; ++i) {
        if (labels(i) == 1)
            c(i) = balanced ? 1.0 / static_cast<double>(abnormal) : 1.0;
        else
            c(i) = balanced ? -1.0 / static_cast<double>(normal) : -1.0;
    }
    return c;
}

void require_both_classes(const Labels& labels) {
    const Index abnormal = labels.sum();
    if (abnormal == 0 || abnormal == labels.size())
        throw Error(ErrorKind::Label, "prompt training needs at least one normal and one anomalous node");
}

}  // namespace

double supervised_prompt_loss(const Vector& scores, const Labels& labels, bool balanced) {
    check_labels(scores, labels);
    if (balanced) require_both_classes(labels);
    return supervised_coefficients(labels, balanced).dot(scores);
}

double percentile(const Vector& values, double p) {
    if (values.size() == 0) throw Error(ErrorKind::Shape, "percentile of an empty vector");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Vector pseudo_weights(const Vector& scores, const UnsupConfig& cfg) {
    cfg.validate();
    const double t = percentile(scores, cfg.threshold_percentile);
    return scores.unaryExpr([&](double s) { return 1.0 / (1.0 + std::exp(-cfg.alpha * (s - t))); });
}

NegativeSamples sample_negatives(Index num_nodes, Index per_node, Rng& rng) {
    NegativeSamples out(static_cast<std::size_t>(num_nodes));
    if (num_nodes < 2) return out;
    for (Index i = 0; i < num_nodes; ++i) {
        auto& picks = out[static_cast<std::size_t>(i)];
        picks.reserve(static_cast<std::size_t>(per_node));
        for (Index k = 0; k < per_node; ++k) {
            auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(num_nodes - 1)));
            if (j >= i) ++j;
            picks.push_back(j);
        }
    }
    return out;
}

EmbeddingLoss unsupervised_loss(const Matrix& z, const Matrix& z_agg, const Vector& weights, double lambda,
                                const NegativeSamples* negatives) {
    if (z.rows() != z_agg.rows() || z.cols() != z_agg.cols() || weights.size() != z.rows())
        throw Error(ErrorKind::Shape, "unsupervised_loss: shapes disagree");
    const Index n = z.rows();
    const auto u = normalize_rows(z);
    const auto v = normalize_rows(z_agg);
    const Vector positive = (u.unit.array() * v.unit.array()).rowwise().sum().matrix();

    Matrix grad_u = -(v.unit.array().colwise() * weights.array()).matrix();
    Matrix grad_v = -(u.unit.array().colwise() * weights.array()).matrix();
    double loss = -weights.dot(positive);

    if (lambda != 0.0 && n > 1) {
        if (negatives == nullptr) {
            // Σ_i Σ_{j≠i} u_i·v_j = (Σu)·(Σv) − Σ_i u_i·v_i
            const RowVector sum_u = u.unit.colwise().sum();
            const RowVector sum_v = v.unit.colwise().sum();
            loss += lambda * (sum_u.dot(sum_v) - positive.sum());
            grad_u += lambda * ((-v.unit).rowwise() + sum_v);
            grad_v += lambda * ((-u.unit).rowwise() + sum_u);
        } else {
            if (static_cast<Index>(negatives->size()) != n)
                throw Error(ErrorKind::Shape, "negative samples must cover every node");
            for (Index i = 0; i < n; ++i) {
                const auto& picks = (*negatives)[static_cast<std::size_t>(i)];
                if (picks.empty()) continue;
                const double scale = lambda * static_cast<double>(n - 1) / static_cast<double>(picks.size());
                for (Index j : picks) {
                    loss += scale * u.unit.row(i).dot(v.unit.row(j));
                    grad_u.row(i) += scale * v.unit.row(j);
                    grad_v.row(j) += scale * u.unit.row(i);
                }
            }
        }
    }
    return {loss, normalize_rows_backward(u, grad_u), normalize_rows_backward(v, grad_v)};
}

EmbeddingLoss supervised_embedding_loss(const Matrix& z, const Matrix& z_agg, const Labels& labels,
                                        bool balanced) {
    if (z.rows() != z_agg.rows() || z.cols() != z_agg.cols())
        throw Error(ErrorKind::Shape, "supervised loss: embedding shapes disagree");
    const auto u = normalize_rows(z);
    const auto v = normalize_rows(z_agg);
    const Vector scores = (u.unit.array() * v.unit.array()).rowwise().sum().matrix();
    check_labels(scores, labels);
    const Vector c = supervised_coefficients(labels, balanced);
    const Matrix grad_u = (v.unit.array().colwise() * c.array()).matrix();
    const Matrix grad_v = (u.unit.array().colwise() * c.array()).matrix();
    return {c.dot(scores), normalize_rows_backward(u, grad_u), normalize_rows_backward(v, grad_v)};
}

Vector pretrained_scores(const RowNormalizedAdjacency& adj, const Matrix& unified, const Matrix& weight) {
    const Matrix latent = unified * weight;
    return rowwise_cosine(latent, sparse_matmul(adj, latent));
}

namespace {

// Shared loop: `objective` maps the forward pass to a loss, gradients and a
// log entry.
using Objective = std::function<EmbeddingLoss(const NodeEmbeddings&, int epoch, TrainLogEntry&)>;

PromptTrainResult run_prompt_loop(const AttributedGraph& g, const UnifiedAttributes& unified,
                                  const GeneralistModel& start, const PromptTrainConfig& cfg,
                                  const Objective& objective, const TrainCallback& on_epoch) {
    cfg.validate();
    validate(start);
    PromptTrainResult result{start, {}, {}, {}};
    GeneralistModel& model = result.model;
    model.stage = ModelStage::Full;
    model.use_transform = cfg.use_transform;
    if (!cfg.train_prompt) {
        model.prompt_tokens.setZero();
        model.token_projections.setZero();
    }
    if (!cfg.use_transform) {
        model.transform_weight = Matrix::Identity(model.shape.d_hidden, model.shape.d_hidden);
        model.transform_bias.setZero();
    }

    const RowNormalizedAdjacency adj = row_normalize(g.adjacency);
    const Matrix& x = unified.values;
    Adam adam(cfg.learning_rate);
    result.log.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const ForwardCache cache = forward_cached(adj, x, model, cfg.use_transform);
        TrainLogEntry entry;
        entry.epoch = epoch;
        const EmbeddingLoss l = objective(cache.out, epoch, entry);
        if (!std::isfinite(l.loss))
            throw Error(ErrorKind::NonFinite, "prompt training diverged at epoch " + std::to_string(epoch));
        entry.loss = l.loss;
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);

        const ModelGradients grads = backward(adj, x, model, cfg.use_transform, cache, l.grad_z, l.grad_z_agg);
        adam.next_step();
        if (cfg.train_prompt) {
            adam.update(0, model.prompt_tokens, grads.prompt_tokens);
            adam.update(1, model.token_projections, grads.token_projections);
        }
        if (cfg.use_transform) {
            adam.update(2, model.transform_weight, grads.transform_weight);
            adam.update(3, model.transform_bias, grads.transform_bias);
        }
    }
    // Same evaluation path as zero-shot scoring, so the two agree bit for bit.
    result.final_scores = predictability_scores(forward(adj, apply_prompt(x, model), model, cfg.use_transform));
    return result;
}

}  // namespace

PromptTrainResult train_prompts(const AttributedGraph& g, const UnifiedAttributes& unified,
                                const GeneralistModel& model, const PromptTrainConfig& cfg,
                                const TrainCallback& on_epoch) {
    if (!g.labels) throw Error(ErrorKind::Label, "prompt training requires node labels");
    const Labels& labels = *g.labels;
    require_both_classes(labels);
    const double n_abnormal = static_cast<double>(labels.sum());
    const double n_normal = static_cast<double>(labels.size()) - n_abnormal;

    auto objective = [&](const NodeEmbeddings& emb, int, TrainLogEntry& entry) {
        EmbeddingLoss l = supervised_embedding_loss(emb.z, emb.z_agg, labels, cfg.balanced);
        const Vector s = predictability_scores(emb);
        double normal = 0.0, abnormal = 0.0;
        for (Index i = 0; i < s.size(); ++i) (labels(i) ? abnormal : normal) += s(i);
        entry.mean_normal = normal / n_normal;
        entry.mean_abnormal = abnormal / n_abnormal;
        return l;
    };
    return run_prompt_loop(g, unified, model, cfg, objective, on_epoch);
}

PromptTrainResult train_unsupervised(const AttributedGraph& g, const UnifiedAttributes& unified,
                                     const GeneralistModel& model, const PromptTrainConfig& cfg,
                                     const UnsupConfig& unsup, Rng& rng, const TrainCallback& on_epoch) {
    unsup.validate();
    const RowNormalizedAdjacency adj = row_normalize(g.adjacency);
    const Vector weights = pseudo_weights(pretrained_scores(adj, unified.values, model.weight), unsup);
    const Index n = g.num_nodes();
    const bool sampled = n > unsup.exact_threshold;

    auto objective = [&](const NodeEmbeddings& emb, int, TrainLogEntry& entry) {
        EmbeddingLoss l;
        if (sampled) {
            const NegativeSamples negatives = sample_negatives(n, unsup.negative_sample_cap, rng);
            l = unsupervised_loss(emb.z, emb.z_agg, weights, unsup.lambda, &negatives);
        } else {
            l = unsupervised_loss(emb.z, emb.z_agg, weights, unsup.lambda);
        }
        entry.mean_weighted = weights.dot(predictability_scores(emb)) / weights.sum();
        return l;
    };
    PromptTrainResult result = run_prompt_loop(g, unified, model, cfg, objective, on_epoch);
    result.weights = weights;
    return result;
}

}  // namespace unprompt
