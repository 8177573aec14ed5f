#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "support.hpp"
#include "unprompt/error.hpp"
#include "unprompt/evaluate.hpp"
#include "unprompt/grad_check.hpp"
#include "unprompt/prompt_train.hpp"
#include "unprompt/synth.hpp"

using namespace unprompt;
using namespace testing_support;

namespace {

SynthSpec planted_spec(std::uint64_t seed) {
    SynthSpec s;
    s.num_nodes = 60;
    s.raw_dim = 16;
    s.anomaly_rate = 0.1;
    s.clique_size = 3;
    s.intra_prob = 0.3;
    s.inter_prob = 0.03;
    s.seed = seed;
    return s;
}

Labels labels_of(std::initializer_list<int> v) {
    Labels y(static_cast<Index>(v.size()));
    Index i = 0;
    for (int x : v) y(i++) = x;
    return y;
}

double brute_unsup(const Matrix& z, const Matrix& za, const Vector& w, double lambda) {
    double total = 0.0;
    for (Index i = 0; i < z.rows(); ++i) {
        total -= w(i) * oracle::cosine(z, i, za, i);
        for (Index j = 0; j < z.rows(); ++j)
            if (j != i) total += lambda * oracle::cosine(z, i, za, j);
    }
    return total;
}

RunConfig small_config(std::uint64_t seed, int prompt_epochs) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.d_h = 32;
    cfg.pretrain.epochs = 50;
    cfg.prompt.epochs = prompt_epochs;
    return cfg;
}

}  // namespace

TEST_SUITE("prompt_trainer") {

TEST_CASE("supervised loss examples") {
    CHECK(supervised_prompt_loss(Vector::Constant(1, 1.0), labels_of({0})) == -1.0);
    CHECK(supervised_prompt_loss(Vector::Constant(1, 0.5), labels_of({1})) == 0.5);
    CHECK(supervised_prompt_loss(Eigen::Vector3d(0.8, -0.2, 0.3), labels_of({0, 0, 1})) ==
          doctest::Approx(-0.3).epsilon(1e-15));
    CHECK_THROWS_AS(supervised_prompt_loss(Eigen::Vector2d(0, 0), labels_of({0, 2})), Error);
    CHECK_THROWS_AS(supervised_prompt_loss(Eigen::Vector2d(0, 0), labels_of({0})), Error);
}

TEST_CASE("supervised loss is linear in the scores") {
    Rng rng(1);
    const Vector s = rng.normal_matrix(9, 1);
    const Labels y = labels_of({0, 1, 0, 0, 1, 0, 0, 0, 1});
    for (double a : {-2.0, 0.5, 4.0})
        CHECK(supervised_prompt_loss(a * s, y) == doctest::Approx(a * supervised_prompt_loss(s, y)).epsilon(1e-14));
    // The balanced form averages within each class.
    CHECK(supervised_prompt_loss(Eigen::Vector3d(0.8, -0.2, 0.3), labels_of({0, 0, 1}), true) ==
          doctest::Approx(-0.3 + 0.3).epsilon(1e-15));
}

TEST_CASE("percentile uses linear interpolation") {
    CHECK(percentile(Eigen::Vector4d(4, 1, 3, 2), 40.0) == doctest::Approx(2.2).epsilon(1e-15));
    CHECK(percentile(Eigen::Vector4d(4, 1, 3, 2), 0.0) == 1.0);
    CHECK(percentile(Eigen::Vector4d(4, 1, 3, 2), 100.0) == 4.0);
}

TEST_CASE("pseudo weights") {
    const UnsupConfig cfg;
    CHECK(cfg.threshold_percentile == 40.0);
    CHECK(cfg.alpha == 10.0);
    // Six scores: the 40th percentile is exactly the third smallest.
    const Vector s = (Vector(6) << 0.1, 0.3, 0.5, 0.4, 0.9, 0.2).finished();
    const Vector w = pseudo_weights(s, cfg);
    const double t = percentile(s, 40.0);
    CHECK(t == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(w(1) == 0.5);
    CHECK(w(3) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(w(3) == doctest::Approx(0.7311).epsilon(1e-4));

    Rng rng(2);
    const Vector r = rng.normal_matrix(40, 1);
    const Vector wr = pseudo_weights(r, cfg);
    for (Index i = 0; i < 40; ++i)
        for (Index j = 0; j < 40; ++j)
            if (r(i) <= r(j)) CHECK(wr(i) <= wr(j));
    CHECK((pseudo_weights((r.array() + 3.7).matrix(), cfg) - wr).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(((wr.array() > 0) && (wr.array() < 1)).all());
}

TEST_CASE("unsupervised loss examples") {
    Rng rng(3);
    const Matrix z1 = rng.normal_matrix(1, 4), a1 = rng.normal_matrix(1, 4);
    CHECK(unsupervised_loss(z1, a1, Vector::Constant(1, 0.7), 0.5).loss ==
          doctest::Approx(-0.7 * oracle::cosine(z1, 0, a1, 0)).epsilon(1e-14));

    const Matrix z = rng.normal_matrix(6, 4), za = rng.normal_matrix(6, 4);
    double total = 0.0;
    for (Index i = 0; i < 6; ++i) total += oracle::cosine(z, i, za, i);
    CHECK(unsupervised_loss(z, za, Vector::Ones(6), 0.0).loss == doctest::Approx(-total).epsilon(1e-14));

    const Matrix z3 = (Matrix(3, 2) << 1, 0, 1, 1, -1, 2).finished();
    const Matrix a3 = (Matrix(3, 2) << 0.5, 0.5, 0, 1, 2, -1).finished();
    const Vector w3 = Eigen::Vector3d(0.2, 0.6, 0.9);
    CHECK(std::abs(unsupervised_loss(z3, a3, w3, 0.3).loss - brute_unsup(z3, a3, w3, 0.3)) <= 1e-12);
}

TEST_CASE("unsupervised loss matches the double loop on random inputs") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 2 + static_cast<Index>(rng.below(30));
        const Matrix z = rng.normal_matrix(n, 5), za = rng.normal_matrix(n, 5);
        const Vector w = rng.uniform_matrix(n, 1, 0.01, 0.99);
        const double lambda = rng.uniform(0.0, 0.1);
        CHECK(std::abs(unsupervised_loss(z, za, w, lambda).loss - brute_unsup(z, za, w, lambda)) <= 1e-12);
    }
}

TEST_CASE("sampled regularizer") {
    Rng rng(5);
    const NegativeSamples full = sample_negatives(7, 200, rng);
    for (Index i = 0; i < 7; ++i)
        for (Index j : full[static_cast<std::size_t>(i)]) CHECK(j != i);

    // Every j ≠ i listed once reproduces the exact value.
    NegativeSamples all(7);
    for (Index i = 0; i < 7; ++i)
        for (Index j = 0; j < 7; ++j)
            if (j != i) all[static_cast<std::size_t>(i)].push_back(j);
    const Matrix z = rng.normal_matrix(7, 3), za = rng.normal_matrix(7, 3);
    const Vector w = Vector::Constant(7, 0.4);
    CHECK(std::abs(unsupervised_loss(z, za, w, 0.2, &all).loss - unsupervised_loss(z, za, w, 0.2).loss) <= 1e-12);

    // Unbiased: the mean over many draws approaches the exact value.
    double mean = 0.0;
    for (int k = 0; k < 400; ++k) {
        const NegativeSamples s = sample_negatives(7, 3, rng);
        mean += unsupervised_loss(z, za, w, 0.2, &s).loss / 400.0;
    }
    CHECK(mean == doctest::Approx(unsupervised_loss(z, za, w, 0.2).loss).epsilon(0.02));
}

TEST_CASE("objective gradients through the model") {
    Rng rng(6);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SynthSpec spec = planted_spec(seed);
        spec.num_nodes = 20;
        spec.structural_frac = 0.0;
        const AttributedGraph g = generate(spec);
        const auto adj = row_normalize(g);
        const Matrix x = unify(g, 6).values;
        GeneralistModel m = init_model({6, 8, 2}, seed);
        m.prompt_tokens = rng.normal_matrix(2, 6);
        m.token_projections = rng.normal_matrix(2, 6);
        m.transform_bias = rng.normal_matrix(1, 8, 0.3);
        const Vector w = rng.uniform_matrix(20, 1, 0.05, 0.95);

        for (bool supervised : {true, false}) {
            CAPTURE(supervised);
            auto embedding_loss = [&](const NodeEmbeddings& e) {
                return supervised ? supervised_embedding_loss(e.z, e.z_agg, *g.labels, false)
                                  : unsupervised_loss(e.z, e.z_agg, w, 0.05);
            };
            const auto c = forward_cached(adj, x, m, true);
            const auto l = embedding_loss(c.out);
            const auto grads = backward(adj, x, m, true, c, l.grad_z, l.grad_z_agg);
            std::vector<ParameterProbe> probes{{"P", &m.prompt_tokens, grads.prompt_tokens},
                                               {"w", &m.token_projections, grads.token_projections},
                                               {"A", &m.transform_weight, grads.transform_weight},
                                               {"b", &m.transform_bias, grads.transform_bias}};
            auto loss = [&] { return embedding_loss(forward_cached(adj, x, m, true).out).loss; };
            for (const auto& r : grad_check(loss, probes, rng, {.probe_count = 12})) {
                CAPTURE(r.parameter);
                CAPTURE(r.max_relative_error);
                CHECK(r.pass);
            }
        }
    }
}

TEST_CASE("zero epochs keep the prompt initialization") {
    const AttributedGraph g = generate(planted_spec(0));
    const UnifiedAttributes u = unify(g, 8);
    const GeneralistModel m = init_model({8, 16, 1}, 4);
    PromptTrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train_prompts(g, u, m, cfg);
    CHECK(r.model.prompt_tokens == m.prompt_tokens);
    CHECK(r.model.token_projections == m.token_projections);
    CHECK(r.model.transform_weight == m.transform_weight);
}

TEST_CASE("prompt training widens the score gap and freezes W") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        CAPTURE(seed);
        const AttributedGraph g = generate(planted_spec(seed));
        const RunConfig cfg = small_config(seed, 300);
        const GeneralistModel pre = pretrain_model(g, cfg, Variant::Full);
        GeneralistModel start = pre;
        Rng rng(seed);
        init_prompt_parameters(start, rng);
        const auto r = train_prompts(g, unify(g, 8), start, cfg.prompt);
        REQUIRE(r.log.size() == 300);
        const double first = r.log.front().mean_normal - r.log.front().mean_abnormal;
        const double last = r.log.back().mean_normal - r.log.back().mean_abnormal;
        CHECK(last > first);
        CHECK(r.model.weight == pre.weight);
    }
}

TEST_CASE("prompt training needs two classes") {
    AttributedGraph g = generate(planted_spec(1));
    const UnifiedAttributes u = unify(g, 8);
    const GeneralistModel m = init_model({8, 16, 1}, 0);
    PromptTrainConfig cfg;
    cfg.epochs = 1;
    g.labels = Labels::Zero(g.num_nodes());
    CHECK_THROWS_AS(train_prompts(g, u, m, cfg), Error);
    g.labels.reset();
    CHECK_THROWS_AS(train_prompts(g, u, m, cfg), Error);
}

TEST_CASE("pseudo weights are fixed once from the pretrained scorer") {
    const AttributedGraph g = generate(planted_spec(2));
    const RunConfig cfg = small_config(2, 20);
    const GeneralistModel pre = pretrain_model(g, cfg, Variant::Full);
    const UnifiedAttributes u = unify(g, 8);
    const Vector expected = pseudo_weights(pretrained_scores(row_normalize(g), u.values, pre.weight), cfg.unsup);

    GeneralistModel start = pre;
    Rng init(1);
    init_prompt_parameters(start, init);
    Rng r1(3), r2(3);
    PromptTrainConfig short_run = cfg.prompt, long_run = cfg.prompt;
    short_run.epochs = 2;
    long_run.epochs = 40;
    const auto a = train_unsupervised(g, u, start, short_run, cfg.unsup, r1);
    const auto b = train_unsupervised(g, u, start, long_run, cfg.unsup, r2);
    CHECK(a.weights == expected);
    CHECK(b.weights == expected);
    CHECK(b.model.weight == pre.weight);
}

TEST_CASE("unsupervised tuning does not lose to the pretrained scorer") {
    std::vector<double> before, after;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const AttributedGraph g = generate(planted_spec(100 + seed));
        const RunConfig cfg = small_config(seed, 300);
        const GeneralistModel pre = pretrain_model(g, cfg, Variant::Full);
        const auto bare = train_on_source(g, pre, cfg, Variant::NoPrompt);
        const auto tuned = train_unsupervised_on(g, pre, cfg);
        before.push_back(*zero_shot_score(g, bare.model).auroc);
        after.push_back(*zero_shot_score(g, tuned.model).auroc);
    }
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    CAPTURE(before[2]);
    CAPTURE(after[2]);
    CHECK(after[2] >= before[2]);
}

}
