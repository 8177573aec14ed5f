#include <doctest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"
#include "unprompt/error.hpp"
#include "unprompt/evaluate.hpp"
#include "unprompt/synth.hpp"

using namespace unprompt;
using namespace testing_support;

namespace {

Labels labels_of(std::initializer_list<int> v) {
    Labels y(static_cast<Index>(v.size()));
    Index i = 0;
    for (int x : v) y(i++) = x;
    return y;
}

SynthSpec small_spec(Index raw_dim, std::uint64_t seed) {
    SynthSpec s;
    s.num_nodes = 80;
    s.raw_dim = raw_dim;
    s.anomaly_rate = 0.1;
    s.clique_size = 4;
    s.intra_prob = 0.2;
    s.inter_prob = 0.02;
    s.seed = seed;
    return s;
}

RunConfig quick_config() {
    RunConfig cfg;
    cfg.d_h = 16;
    cfg.pretrain.epochs = 10;
    cfg.prompt.epochs = 20;
    return cfg;
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("auroc examples") {
    CHECK(auroc(Eigen::Vector3d(0.9, 0.2, 0.1), labels_of({1, 0, 0})) == 1.0);
    CHECK(auroc(Eigen::Vector2d(0.5, 0.5), labels_of({1, 0})) == 0.5);
    CHECK(auroc(Eigen::Vector4d(0.8, 0.7, 0.6, 0.5), labels_of({1, 0, 1, 0})) == 0.75);
    CHECK_THROWS_AS(auroc(Eigen::Vector2d(0.1, 0.2), labels_of({1, 1})), Error);
}

TEST_CASE("auprc examples") {
    CHECK(auprc(Eigen::Vector2d(0.9, 0.1), labels_of({1, 0})) == 1.0);
    CHECK(auprc(Vector::Constant(5, 0.3), labels_of({0, 1, 0, 1, 0})) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(auprc(Eigen::Vector3d(0.9, 0.8, 0.7), labels_of({0, 1, 1})) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
    CHECK_THROWS_AS(auprc(Eigen::Vector2d(0.1, 0.2), labels_of({0, 0})), Error);
}

TEST_CASE("metrics agree with brute force, ties included") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 2 + static_cast<Index>(rng.below(199));
        Vector s(n);
        Labels y(n);
        for (Index i = 0; i < n; ++i) {
            s(i) = static_cast<double>(rng.below(12)) / 4.0;
            y(i) = rng.bernoulli(0.3) ? 1 : 0;
        }
        y(0) = 1;
        y(n - 1) = 0;
        CHECK(std::abs(auroc(s, y) - oracle::auroc(s, y)) <= 1e-12);
        CHECK(std::abs(auprc(s, y) - oracle::average_precision(s, y)) <= 1e-12);

        // Strictly increasing transform and polarity flip.
        const Vector t = s.unaryExpr([](double v) { return std::exp(3.0 * v); });
        CHECK(auroc(t, y) == auroc(s, y));
        const Labels flipped = (1 - y.array()).matrix();
        CHECK(std::abs(auroc(-s, flipped) - auroc(s, y)) <= 1e-12);
    }
}

TEST_CASE("zero-shot scoring across dimensionalities") {
    const AttributedGraph source = generate(small_spec(30, 1));
    const AttributedGraph target = generate(small_spec(12, 2));
    const RunConfig cfg = quick_config();
    const PipelineResult trained = run_pipeline(source, cfg);
    const std::string id = model_id(trained.model);

    const ScoreReport a = zero_shot_score(target, trained.model, 8);
    const ScoreReport b = zero_shot_score(target, trained.model, 8);
    CHECK(model_id(trained.model) == id);
    CHECK(a.normality == b.normality);
    CHECK(a.anomaly_score == -a.normality);
    CHECK(a.auroc.has_value());
    CHECK(a.auprc.has_value());
    CHECK(a.model_id == id);
    CHECK(((a.normality.array() >= -1.0) && (a.normality.array() <= 1.0)).all());
    CHECK_THROWS_AS(zero_shot_score(target, trained.model, 6), Error);

    AttributedGraph unlabeled = target;
    unlabeled.labels.reset();
    const ScoreReport c = zero_shot_score(unlabeled, trained.model);
    CHECK_FALSE(c.auroc.has_value());
    CHECK(c.normality == a.normality);
}

TEST_CASE("scoring the training graph reproduces the final training scores") {
    const AttributedGraph g = generate(small_spec(20, 3));
    const RunConfig cfg = quick_config();
    const GeneralistModel pre = pretrain_model(g, cfg, Variant::Full);
    GeneralistModel start = pre;
    Rng rng(1);
    init_prompt_parameters(start, rng);
    const auto r = train_prompts(g, unify(g, 8), start, cfg.prompt);
    CHECK(zero_shot_score(g, r.model).normality == r.final_scores);
}

TEST_CASE("ablation switches") {
    const AttributedGraph g = generate(small_spec(20, 4));
    const RunConfig cfg = quick_config();
    const GeneralistModel pre = pretrain_model(g, cfg, Variant::Full);

    const auto bare = train_on_source(g, pre, cfg, Variant::NoPrompt);
    const Vector expected = pretrained_scores(row_normalize(g), unify(g, 8).values, pre.weight);
    CHECK((zero_shot_score(g, bare.model).normality - expected).cwiseAbs().maxCoeff() < 1e-12);

    const auto no_h = train_on_source(g, pre, cfg, Variant::NoTransform);
    CHECK_FALSE(no_h.model.use_transform);
    const auto adj = row_normalize(g);
    const auto emb = forward(adj, apply_prompt(unify(g, 8), no_h.model), no_h.model, false);
    CHECK(zero_shot_score(g, no_h.model).normality == predictability_scores(emb));

    const GeneralistModel fresh = pretrain_model(g, cfg, Variant::NoPretrain);
    CHECK(fresh.weight == init_model(cfg.shape(), cfg.seed).weight);
    CHECK_FALSE(pretrain_model(g, cfg, Variant::NoNormalization).normalize_attributes);

    for (const char* name : {"full", "no-normalization", "no-pretrain", "no-prompt", "no-transform"})
        CHECK(to_string(parse_variant(name)) == name);
    CHECK_THROWS_AS(parse_variant("no-graph"), Error);
}

TEST_CASE("report files") {
    ScoreReport r;
    r.normality = Eigen::Vector3d(0.5, -0.25, 1.0 / 3.0);
    r.anomaly_score = -r.normality;
    r.auroc = 0.75;
    r.auprc = 0.5;
    r.model_id = "abc";
    const auto dir = scratch_dir("report");
    write_scores_csv(r, dir / "s.csv");
    std::ifstream in(dir / "s.csv");
    std::string header, row0, row1, row2;
    std::getline(in, header);
    std::getline(in, row0);
    std::getline(in, row1);
    std::getline(in, row2);
    CHECK(header == "node_id,normality,anomaly_score");
    CHECK(row0 == "0,0.5,-0.5");
    CHECK(std::stod(row2.substr(2)) == 1.0 / 3.0);

    const auto j = nlohmann::json::parse(metrics_json(r));
    CHECK(j.at("auroc") == 0.75);
    CHECK(j.at("auprc") == 0.5);
    CHECK(j.at("model_id") == "abc");

    write_histogram_csv(r, labels_of({0, 1, 0}), dir / "h.csv", 4);
    std::ifstream h(dir / "h.csv");
    std::string line;
    int rows = 0;
    long normal = 0, abnormal = 0;
    std::getline(h, line);
    while (std::getline(h, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string lo, hi, n, a;
        std::getline(ss, lo, ',');
        std::getline(ss, hi, ',');
        std::getline(ss, n, ',');
        std::getline(ss, a, ',');
        normal += std::stol(n);
        abnormal += std::stol(a);
    }
    CHECK(rows == 4);
    CHECK(normal == 2);
    CHECK(abnormal == 1);
}

}
