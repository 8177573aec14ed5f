#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "unprompt/config.hpp"
#include "unprompt/error.hpp"
#include "unprompt/evaluate.hpp"
#include "unprompt/graph.hpp"
#include "unprompt/model.hpp"
#include "unprompt/synth.hpp"
#include "unprompt/unify.hpp"

namespace fs = std::filesystem;
using namespace unprompt;

namespace {

// Flag values stay empty unless given, so the config file can fill the gaps.
struct ConfigFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<Index> d_prime, d_h, K;
    std::optional<std::string> nonlinearity;
    std::optional<int> pretrain_epochs, prompt_epochs;
    std::optional<double> pretrain_lr, tau, edge_drop, attr_mask, prompt_lr;
    std::optional<bool> balanced;
    std::optional<double> percentile, alpha, lambda;
    std::optional<Index> exact_threshold, negative_sample_cap;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        app->add_option("--seed", seed);
        app->add_option("--d-prime", d_prime);
        app->add_option("--d-h", d_h);
        app->add_option("--K", K);
        app->add_option("--nonlinearity", nonlinearity);
        app->add_option("--pretrain-epochs", pretrain_epochs);
        app->add_option("--pretrain-lr", pretrain_lr);
        app->add_option("--tau", tau);
        app->add_option("--edge-drop", edge_drop);
        app->add_option("--attr-mask", attr_mask);
        app->add_option("--prompt-epochs", prompt_epochs);
        app->add_option("--prompt-lr", prompt_lr);
        app->add_option("--balanced", balanced);
        app->add_option("--percentile", percentile);
        app->add_option("--alpha", alpha);
        app->add_option("--lambda", lambda);
        app->add_option("--exact-threshold", exact_threshold);
        app->add_option("--negative-sample-cap", negative_sample_cap);
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        auto set = [](const auto& flag, auto& field) {
            if (flag) field = *flag;
        };
        set(seed, cfg.seed);
        set(d_prime, cfg.d_prime);
        set(d_h, cfg.d_h);
        set(K, cfg.K);
        if (nonlinearity) cfg.nonlinearity = parse_nonlinearity(*nonlinearity);
        set(pretrain_epochs, cfg.pretrain.epochs);
        set(pretrain_lr, cfg.pretrain.learning_rate);
        set(tau, cfg.pretrain.temperature);
        set(edge_drop, cfg.augment.edge_removal_prob);
        set(attr_mask, cfg.augment.attr_mask_prob);
        set(prompt_epochs, cfg.prompt.epochs);
        set(prompt_lr, cfg.prompt.learning_rate);
        set(balanced, cfg.prompt.balanced);
        set(percentile, cfg.unsup.threshold_percentile);
        set(alpha, cfg.unsup.alpha);
        set(lambda, cfg.unsup.lambda);
        set(exact_threshold, cfg.unsup.exact_threshold);
        set(negative_sample_cap, cfg.unsup.negative_sample_cap);
        cfg.validate();
        return cfg;
    }
};

void print_config(const RunConfig& cfg) { std::cout << "config " << to_json(cfg).dump() << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text << '\n';
}

void report_scores(ScoreReport report, const fs::path& data_dir, const AttributedGraph& g, const fs::path& out,
                   const std::string& metrics, const std::string& hist, int bins) {
    report.graph_id = data_dir.filename().string();
    if (report.graph_id.empty()) report.graph_id = data_dir.parent_path().filename().string();
    write_scores_csv(report, out);
    const std::string summary = metrics_json(report);
    std::cout << summary << '\n';
    if (!metrics.empty()) write_text(metrics, summary);
    if (!hist.empty()) {
        if (!g.labels) throw Error(ErrorKind::Label, "--emit-hist needs labels.csv");
        write_histogram_csv(report, *g.labels, hist, bins);
    }
}

void write_pretrain_log(const std::vector<double>& losses, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < losses.size(); ++e) out << e << ',' << losses[e] << '\n';
}

void write_prompt_log(const std::vector<TrainLogEntry>& log, bool supervised, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out.precision(17);
    out << (supervised ? "epoch,loss,mean_normal,mean_abnormal\n" : "epoch,loss,mean_weighted\n");
    for (const auto& e : log) {
        out << e.epoch << ',' << e.loss << ',';
        if (supervised) out << e.mean_normal << ',' << e.mean_abnormal << '\n';
        else out << e.mean_weighted << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Training allocates many N×N temporaries; keep them on the heap instead
    // of a fresh mmap per matrix.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    CLI::App app{"Zero-shot generalist graph anomaly detection with neighborhood prompts"};
    app.require_subcommand(1);

    ConfigFlags flags;
    std::string data, out, pretrained_path, model_path, metrics, hist, source, target, variant_name, spec_path;
    std::string log_path, stats_path;
    int bins = 20;
    bool pair = false;
    std::vector<std::string> dirs;

    auto* pretrain = app.add_subcommand("pretrain", "contrastive pretraining of W on one dataset");
    flags.attach(pretrain);
    pretrain->add_option("--data", data)->required();
    pretrain->add_option("--out", out)->required();
    pretrain->add_option("--variant", variant_name, "full | no-normalization | no-pretrain");
    pretrain->add_option("--log", log_path, "per-epoch loss CSV");

    auto* train = app.add_subcommand("train", "supervised prompt tuning on a labeled dataset");
    flags.attach(train);
    train->add_option("--data", data)->required();
    train->add_option("--pretrained", pretrained_path)->required();
    train->add_option("--out", out)->required();
    train->add_option("--variant", variant_name, "full | no-prompt | no-transform");
    train->add_option("--log", log_path, "per-epoch training log CSV");

    auto* unsup = app.add_subcommand("train-unsup", "pseudo-labeled prompt tuning without labels");
    flags.attach(unsup);
    unsup->add_option("--data", data)->required();
    unsup->add_option("--pretrained", pretrained_path)->required();
    unsup->add_option("--out", out)->required();
    unsup->add_option("--log", log_path, "per-epoch training log CSV");

    auto* score = app.add_subcommand("score", "zero-shot scoring of a dataset");
    flags.attach(score);
    score->add_option("--model", model_path)->required();
    score->add_option("--data", data)->required();
    score->add_option("--out", out)->required();
    score->add_option("--metrics", metrics);
    score->add_option("--emit-hist", hist, "per-class normality histogram CSV");
    score->add_option("--bins", bins)->check(CLI::PositiveNumber);

    auto* ablate_cmd = app.add_subcommand("ablate", "train a variant on --source and score --target");
    flags.attach(ablate_cmd);
    ablate_cmd->add_option("--variant", variant_name)->required();
    ablate_cmd->add_option("--source", source)->required();
    ablate_cmd->add_option("--target", target)->required();
    ablate_cmd->add_option("--out", out)->required();
    ablate_cmd->add_option("--metrics", metrics);

    auto* synth = app.add_subcommand("synth", "write a synthetic dataset directory");
    flags.attach(synth);
    synth->add_option("--spec", spec_path, "JSON generator spec")->check(CLI::ExistingFile);
    synth->add_option("--out", out)->required();
    synth->add_flag("--pair", pair, "write the default cross-domain pair to <out>/source and <out>/target");

    auto* inspect = app.add_subcommand("inspect-unify", "unification statistics and distribution similarity");
    flags.attach(inspect);
    inspect->add_option("dirs", dirs)->required();
    inspect->add_option("--out", out, "pairwise similarity CSV");
    inspect->add_option("--stats", stats_path, "per-column mean/std before and after normalization, CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << '\n';
        return 2;
    }

    try {
        const RunConfig cfg = flags.resolve();
        print_config(cfg);

        if (*pretrain) {
            const Variant v = variant_name.empty() ? Variant::Full : parse_variant(variant_name);
            if (v == Variant::NoPrompt || v == Variant::NoTransform)
                throw Error(ErrorKind::Config, "variant " + variant_name + " applies to train, not pretrain");
            const AttributedGraph g = load_dataset(data);
            std::vector<double> losses;
            const GeneralistModel model = pretrain_model(g, cfg, v, &losses);
            save_model(model, out);
            write_pretrain_log(losses, log_path);
            if (!losses.empty())
                std::cout << "pretrain loss " << losses.front() << " -> " << losses.back() << '\n';
            std::cout << "model_id " << model_id(model) << '\n';
        } else if (*train) {
            const Variant v = variant_name.empty() ? Variant::Full : parse_variant(variant_name);
            if (v == Variant::NoNormalization || v == Variant::NoPretrain)
                throw Error(ErrorKind::Config, "variant " + variant_name + " is chosen at pretrain time");
            const AttributedGraph g = load_dataset(data);
            if (!g.labels) throw Error(ErrorKind::Label, "train needs labels.csv in " + data);
            const GeneralistModel pre = load_model(pretrained_path);
            const PipelineResult r = train_on_source(g, pre, cfg, v);
            save_model(r.model, out);
            write_prompt_log(r.prompt_log, true, log_path);
            if (!r.prompt_log.empty())
                std::cout << "prompt loss " << r.prompt_log.front().loss << " -> " << r.prompt_log.back().loss << '\n';
            std::cout << "model_id " << model_id(r.model) << '\n';
        } else if (*unsup) {
            const AttributedGraph g = load_dataset(data);
            const GeneralistModel pre = load_model(pretrained_path);
            const PipelineResult r = train_unsupervised_on(g, pre, cfg);
            save_model(r.model, out);
            write_prompt_log(r.prompt_log, false, log_path);
            std::cout << "model_id " << model_id(r.model) << '\n';
        } else if (*score) {
            const AttributedGraph g = load_dataset(data);
            const GeneralistModel model = load_model(model_path);
            report_scores(zero_shot_score(g, model, cfg.d_prime), data, g, out, metrics, hist, bins);
        } else if (*ablate_cmd) {
            const AttributedGraph src = load_dataset(source);
            const AttributedGraph tgt = load_dataset(target);
            if (!src.labels) throw Error(ErrorKind::Label, "ablate needs labels.csv in " + source);
            report_scores(ablate(parse_variant(variant_name), src, tgt, cfg), target, tgt, out, metrics, "", bins);
        } else if (*synth) {
            if (pair) {
                if (!spec_path.empty()) throw Error(ErrorKind::Config, "--pair uses the built-in pair specs");
                const auto [a, b] = default_pair_specs(cfg.seed);
                const auto [ga, gb] = generate_pair(a, b);
                save_dataset(ga, fs::path(out) / "source");
                save_dataset(gb, fs::path(out) / "target");
                std::cout << "source " << nlohmann::json(to_json(a)).dump() << '\n';
                std::cout << "target " << nlohmann::json(to_json(b)).dump() << '\n';
            } else {
                SynthSpec spec = spec_path.empty() ? SynthSpec{} : load_synth_spec(spec_path);
                if (flags.seed) spec.seed = *flags.seed;
                save_dataset(generate(spec), out);
                std::cout << "spec " << nlohmann::json(to_json(spec)).dump() << '\n';
            }
        } else if (*inspect) {
            std::vector<UnifiedAttributes> projected, normalized;
            std::ofstream stats;
            if (!stats_path.empty()) {
                stats.open(stats_path);
                if (!stats) throw Error(ErrorKind::Io, "cannot write " + stats_path);
                stats.precision(17);
                stats << "graph,column,mean_before,std_before,mean_after,std_after\n";
            }
            for (const auto& dir : dirs) {
                const AttributedGraph g = load_dataset(dir);
                projected.push_back(unify(g, cfg.d_prime, {.normalize = false}));
                normalized.push_back(unify(g, cfg.d_prime));
                const Matrix& x = normalized.back().values;
                const Vector mean = column_means(x), sd = column_stds(x);
                if (stats.is_open()) {
                    const Vector mean0 = column_means(projected.back().values);
                    const Vector sd0 = column_stds(projected.back().values);
                    for (Index j = 0; j < x.cols(); ++j)
                        stats << dir << ',' << j << ',' << mean0(j) << ',' << sd0(j) << ',' << mean(j) << ','
                              << sd(j) << '\n';
                }
                double max_dev = 0.0;
                for (Index j = 0; j < sd.size(); ++j)
                    if (sd(j) > 0) max_dev = std::max(max_dev, std::abs(sd(j) - 1.0));
                std::cout << dir << ": nodes " << g.num_nodes() << " raw_dim " << g.num_attributes() << " edges "
                          << g.num_edges() << " max|mean| " << mean.cwiseAbs().maxCoeff() << " max|std-1| "
                          << max_dev << '\n';
            }
            std::ofstream csv;
            if (!out.empty()) {
                csv.open(out);
                if (!csv) throw Error(ErrorKind::Io, "cannot write " + out);
                csv << "graph_a,graph_b,similarity_projected,similarity_normalized\n";
            }
            for (std::size_t a = 0; a < dirs.size(); ++a)
                for (std::size_t b = a + 1; b < dirs.size(); ++b) {
                    const double before = distribution_similarity(projected[a].values, projected[b].values);
                    const double after = distribution_similarity(normalized[a].values, normalized[b].values);
                    std::cout << dirs[a] << " ~ " << dirs[b] << ": projected " << before << " normalized " << after
                              << '\n';
                    if (csv.is_open())
                        csv << dirs[a] << ',' << dirs[b] << ',' << before << ',' << after << '\n';
                }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
