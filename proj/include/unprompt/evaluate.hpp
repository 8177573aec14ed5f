#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unprompt/config.hpp"
#include "unprompt/graph.hpp"
#include "unprompt/model.hpp"
#include "unprompt/prompt_train.hpp"

namespace unprompt {

struct ScoreReport {
    Vector normality;      // s_i
    Vector anomaly_score;  // −s_i, higher is more anomalous
    std::optional<double> auroc;
    std::optional<double> auprc;
    std::string graph_id;
    std::string model_id;
    std::uint64_t seed = 0;
};

// Probability that a random positive outranks a random negative, ties count
// one half. Metric error unless both classes are present.
double auroc(const Vector& anomaly_scores, const Labels& labels);

// Average precision with tied scores processed as one block. Metric error
// without positives.
double auprc(const Vector& anomaly_scores, const Labels& labels);

// Unifies the graph on its own, applies the learned prompt, runs the frozen
// network and h, and scores every node. The model is never modified. Config
// error when `d_prime` disagrees with the model.
ScoreReport zero_shot_score(const AttributedGraph& g, const GeneralistModel& model, Index d_prime);
inline ScoreReport zero_shot_score(const AttributedGraph& g, const GeneralistModel& model) {
    return zero_shot_score(g, model, model.shape.d_prime);
}

enum class Variant { Full, NoNormalization, NoPretrain, NoPrompt, NoTransform };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct PipelineResult {
    GeneralistModel model;
    std::vector<double> pretrain_loss;
    std::vector<TrainLogEntry> prompt_log;
};

// Pretrained-only network (stage Pretrained), honoring the normalization and
// pretraining switches of `variant`.
GeneralistModel pretrain_model(const AttributedGraph& source, const RunConfig& cfg, Variant variant,
                               std::vector<double>* loss_history = nullptr);

// Prompt stage on top of a pretrained model. The no-prompt variant skips it
// entirely and yields the bare pretrained scorer.
PipelineResult train_on_source(const AttributedGraph& source, const GeneralistModel& pretrained,
                               const RunConfig& cfg, Variant variant);

// Label-free prompt stage on the graph the model was pretrained on.
PipelineResult train_unsupervised_on(const AttributedGraph& g, const GeneralistModel& pretrained,
                                     const RunConfig& cfg);

// pretrain_model followed by train_on_source.
PipelineResult run_pipeline(const AttributedGraph& source, const RunConfig& cfg, Variant variant = Variant::Full);

// Trains the named variant on `source` and scores `target` zero-shot.
ScoreReport ablate(Variant variant, const AttributedGraph& source, const AttributedGraph& target,
                   const RunConfig& cfg);

// node_id,normality,anomaly_score with round-trip precision.
void write_scores_csv(const ScoreReport& report, const std::filesystem::path& path);
// {auroc, auprc, seed, model_id, graph_id, num_nodes}; metrics omitted without labels.
std::string metrics_json(const ScoreReport& report);
// Per-class histogram of normality scores over [-1, 1]: bin_lo,bin_hi,normal,abnormal.
void write_histogram_csv(const ScoreReport& report, const Labels& labels, const std::filesystem::path& path,
                         int bins = 20);

}  // namespace unprompt
