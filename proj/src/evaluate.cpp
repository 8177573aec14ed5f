#include "unprompt/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "unprompt/error.hpp"
#include "unprompt/numerics.hpp"
#include "unprompt/pretrain.hpp"
#include "unprompt/unify.hpp"

namespace unprompt {

namespace {

void check_metric_inputs(const Vector& scores, const Labels& labels) {
    if (scores.size() != labels.size()) throw Error(ErrorKind::Shape, "scores and labels have different lengths");
    for (Index i = 0; i < labels.size(); ++i)
        if (labels(i) != 0 && labels(i) != 1) throw Error(ErrorKind::Label, "labels must be 0/1");
    if (!scores.allFinite()) throw Error(ErrorKind::NonFinite, "scores contain NaN or Inf");
}

std::vector<Index> order_by_score(const Vector& scores, bool descending) {
    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return descending ? scores(a) > scores(b) : scores(a) < scores(b);
    });
    return order;
}

}  // namespace

double auroc(const Vector& anomaly_scores, const Labels& labels) {
    check_metric_inputs(anomaly_scores, labels);
    const double positives = static_cast<double>(labels.sum());
    const double negatives = static_cast<double>(labels.size()) - positives;
    if (positives == 0 || negatives == 0) throw Error(ErrorKind::Metric, "AUROC needs both classes");

    const auto order = order_by_score(anomaly_scores, false);
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && anomaly_scores(order[j + 1]) == anomaly_scores(order[i])) ++j;
        const double average_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels(order[k]) == 1) positive_rank_sum += average_rank;
        i = j + 1;
    }
    return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double auprc(const Vector& anomaly_scores, const Labels& labels) {
    check_metric_inputs(anomaly_scores, labels);
    const double positives = static_cast<double>(labels.sum());
    if (positives == 0) throw Error(ErrorKind::Metric, "AUPRC needs at least one positive");

    const auto order = order_by_score(anomaly_scores, true);
    double tp = 0.0, fp = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double block_tp = 0.0;
        while (true) {
            if (labels(order[j]) == 1) block_tp += 1.0;
            else fp += 1.0;
            if (j + 1 < order.size() && anomaly_scores(order[j + 1]) == anomaly_scores(order[i])) ++j;
            else break;
        }
        tp += block_tp;
        if (block_tp > 0) ap += (tp / (tp + fp)) * (block_tp / positives);
        i = j + 1;
    }
    return ap;
}

ScoreReport zero_shot_score(const AttributedGraph& g, const GeneralistModel& model, Index d_prime) {
    if (d_prime != model.shape.d_prime)
        throw Error(ErrorKind::Config, "requested d_prime " + std::to_string(d_prime) + " but the model uses " +
                                           std::to_string(model.shape.d_prime));
    validate(model);
    const UnifiedAttributes unified = unify(g, d_prime, {.normalize = model.normalize_attributes});
    const RowNormalizedAdjacency adj = row_normalize(g);
    const NodeEmbeddings emb = forward(adj, apply_prompt(unified, model), model, model.use_transform);

    ScoreReport report;
    report.normality = predictability_scores(emb);
    report.anomaly_score = -report.normality;
    report.model_id = model_id(model);
    report.seed = model.seed;
    if (g.labels) {
        const Index positives = g.labels->sum();
        if (positives > 0 && positives < g.labels->size()) {
            report.auroc = auroc(report.anomaly_score, *g.labels);
            report.auprc = auprc(report.anomaly_score, *g.labels);
        }
    }
    return report;
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoNormalization: return "no-normalization";
        case Variant::NoPretrain: return "no-pretrain";
        case Variant::NoPrompt: return "no-prompt";
        case Variant::NoTransform: return "no-transform";
    }
    return "full";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::Full, Variant::NoNormalization, Variant::NoPretrain, Variant::NoPrompt,
                      Variant::NoTransform})
        if (to_string(v) == name) return v;
    throw Error(ErrorKind::Config, "unknown ablation variant '" + name + "'");
}

GeneralistModel pretrain_model(const AttributedGraph& source, const RunConfig& cfg, Variant variant,
                               std::vector<double>* loss_history) {
    cfg.validate();
    const bool normalize = variant != Variant::NoNormalization;
    GeneralistModel model = init_model(cfg.shape(), cfg.seed, cfg.nonlinearity);
    model.stage = ModelStage::Pretrained;
    model.normalize_attributes = normalize;
    if (variant != Variant::NoPretrain) {
        const UnifiedAttributes unified = unify(source, cfg.d_prime, {.normalize = normalize});
        Rng rng = Rng(cfg.seed).fork(2);
        PretrainResult r = pretrain(source, unified, cfg.augment, cfg.pretrain, model.weight, rng);
        model.weight = std::move(r.weight);
        if (loss_history) *loss_history = std::move(r.loss_history);
    }
    return model;
}

PipelineResult train_on_source(const AttributedGraph& source, const GeneralistModel& pretrained,
                               const RunConfig& cfg, Variant variant) {
    cfg.validate();
    if (!(pretrained.shape == cfg.shape()))
        throw Error(ErrorKind::Config, "pretrained model dimensions disagree with the run configuration");
    PipelineResult result;
    GeneralistModel model = pretrained;
    model.nonlinearity = cfg.nonlinearity;
    Rng prompt_rng = Rng(cfg.seed).fork(1);
    init_prompt_parameters(model, prompt_rng);
    model.seed = cfg.seed;

    if (variant == Variant::NoPrompt) {
        model.stage = ModelStage::Full;
        model.prompt_tokens.setZero();
        model.token_projections.setZero();
        model.use_transform = false;
        model.transform_weight = Matrix::Identity(cfg.d_h, cfg.d_h);
        model.transform_bias.setZero();
        result.model = std::move(model);
        return result;
    }

    PromptTrainConfig prompt = cfg.prompt;
    prompt.use_transform = variant != Variant::NoTransform;
    const UnifiedAttributes unified = unify(source, cfg.d_prime, {.normalize = model.normalize_attributes});
    PromptTrainResult r = train_prompts(source, unified, model, prompt);
    result.model = std::move(r.model);
    result.prompt_log = std::move(r.log);
    return result;
}

PipelineResult train_unsupervised_on(const AttributedGraph& g, const GeneralistModel& pretrained,
                                     const RunConfig& cfg) {
    cfg.validate();
    if (!(pretrained.shape == cfg.shape()))
        throw Error(ErrorKind::Config, "pretrained model dimensions disagree with the run configuration");
    GeneralistModel model = pretrained;
    model.nonlinearity = cfg.nonlinearity;
    model.seed = cfg.seed;
    Rng prompt_rng = Rng(cfg.seed).fork(1);
    init_prompt_parameters(model, prompt_rng);
    Rng negative_rng = Rng(cfg.seed).fork(3);
    const UnifiedAttributes unified = unify(g, cfg.d_prime, {.normalize = model.normalize_attributes});
    PromptTrainResult r = train_unsupervised(g, unified, model, cfg.prompt, cfg.unsup, negative_rng);
    PipelineResult result;
    result.model = std::move(r.model);
    result.prompt_log = std::move(r.log);
    return result;
}

PipelineResult run_pipeline(const AttributedGraph& source, const RunConfig& cfg, Variant variant) {
    std::vector<double> pretrain_loss;
    const GeneralistModel pretrained = pretrain_model(source, cfg, variant, &pretrain_loss);
    PipelineResult result = train_on_source(source, pretrained, cfg, variant);
    result.pretrain_loss = std::move(pretrain_loss);
    return result;
}

ScoreReport ablate(Variant variant, const AttributedGraph& source, const AttributedGraph& target,
                   const RunConfig& cfg) {
    const PipelineResult trained = run_pipeline(source, cfg, variant);
    return zero_shot_score(target, trained.model, cfg.d_prime);
}

namespace {

std::string format_real(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

}  // namespace

void write_scores_csv(const ScoreReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << "node_id,normality,anomaly_score\n";
    for (Index i = 0; i < report.normality.size(); ++i)
        out << i << ',' << format_real(report.normality(i)) << ',' << format_real(report.anomaly_score(i)) << '\n';
}

std::string metrics_json(const ScoreReport& report) {
    nlohmann::ordered_json j;
    if (report.auroc) j["auroc"] = *report.auroc;
    if (report.auprc) j["auprc"] = *report.auprc;
    j["seed"] = report.seed;
    j["model_id"] = report.model_id;
    if (!report.graph_id.empty()) j["graph_id"] = report.graph_id;
    j["num_nodes"] = report.normality.size();
    return j.dump(2);
}

void write_histogram_csv(const ScoreReport& report, const Labels& labels, const std::filesystem::path& path,
                         int bins) {
    if (labels.size() != report.normality.size())
        throw Error(ErrorKind::Shape, "histogram: label count does not match scores");
    std::vector<long> normal(static_cast<std::size_t>(bins), 0), abnormal(static_cast<std::size_t>(bins), 0);
    for (Index i = 0; i < labels.size(); ++i) {
        int b = static_cast<int>(std::floor((report.normality(i) + 1.0) / 2.0 * bins));
        b = std::clamp(b, 0, bins - 1);
        (labels(i) ? abnormal : normal)[static_cast<std::size_t>(b)]++;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << "bin_lo,bin_hi,normal,abnormal\n";
    for (int b = 0; b < bins; ++b)
        out << format_real(-1.0 + 2.0 * b / bins) << ',' << format_real(-1.0 + 2.0 * (b + 1) / bins) << ','
            << normal[static_cast<std::size_t>(b)] << ',' << abnormal[static_cast<std::size_t>(b)] << '\n';
}

}  // namespace unprompt
