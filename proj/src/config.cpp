#include "unprompt/config.hpp"

#include <fstream>

#include "unprompt/error.hpp"

namespace unprompt {

void RunConfig::validate() const {
    if (d_prime < 1 || d_h < 1 || K < 1) throw Error(ErrorKind::Config, "d_prime, d_h and K must be positive");
    augment.validate();
    pretrain.validate();
    prompt.validate();
    unsup.validate();
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["d_prime"] = cfg.d_prime;
    j["d_h"] = cfg.d_h;
    j["K"] = cfg.K;
    j["nonlinearity"] = to_string(cfg.nonlinearity);
    j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"lr", cfg.pretrain.learning_rate},
                     {"tau", cfg.pretrain.temperature},
                     {"edge_drop", cfg.augment.edge_removal_prob},
                     {"attr_mask", cfg.augment.attr_mask_prob}};
    j["prompt"] = {{"epochs", cfg.prompt.epochs}, {"lr", cfg.prompt.learning_rate}, {"balanced", cfg.prompt.balanced}};
    j["unsup"] = {{"percentile", cfg.unsup.threshold_percentile},
                  {"alpha", cfg.unsup.alpha},
                  {"lambda", cfg.unsup.lambda},
                  {"exact_threshold", cfg.unsup.exact_threshold},
                  {"negative_sample_cap", cfg.unsup.negative_sample_cap}};
    j["seed"] = cfg.seed;
    return j;
}

namespace {

template <typename T>
void take(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, where + key + ": " + e.what());
    }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool found = false;
        for (const char* k : known) found = found || key == k;
        if (!found) throw Error(ErrorKind::Config, "unknown config key '" + where + key + "'");
    }
}

}  // namespace

void merge_json(RunConfig& cfg, const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::Config, "config document must be an object");
    reject_unknown(doc, {"d_prime", "d_h", "K", "nonlinearity", "pretrain", "prompt", "unsup", "seed"}, "");
    take(doc, "d_prime", cfg.d_prime, "");
    take(doc, "d_h", cfg.d_h, "");
    take(doc, "K", cfg.K, "");
    if (doc.contains("nonlinearity")) {
        std::string name;
        take(doc, "nonlinearity", name, "");
        cfg.nonlinearity = parse_nonlinearity(name);
    }
    take(doc, "seed", cfg.seed, "");
    if (doc.contains("pretrain")) {
        const auto& p = doc.at("pretrain");
        reject_unknown(p, {"epochs", "lr", "tau", "edge_drop", "attr_mask"}, "pretrain.");
        take(p, "epochs", cfg.pretrain.epochs, "pretrain.");
        take(p, "lr", cfg.pretrain.learning_rate, "pretrain.");
        take(p, "tau", cfg.pretrain.temperature, "pretrain.");
        take(p, "edge_drop", cfg.augment.edge_removal_prob, "pretrain.");
        take(p, "attr_mask", cfg.augment.attr_mask_prob, "pretrain.");
    }
    if (doc.contains("prompt")) {
        const auto& p = doc.at("prompt");
        reject_unknown(p, {"epochs", "lr", "balanced"}, "prompt.");
        take(p, "epochs", cfg.prompt.epochs, "prompt.");
        take(p, "lr", cfg.prompt.learning_rate, "prompt.");
        take(p, "balanced", cfg.prompt.balanced, "prompt.");
    }
    if (doc.contains("unsup")) {
        const auto& u = doc.at("unsup");
        reject_unknown(u, {"percentile", "alpha", "lambda", "exact_threshold", "negative_sample_cap"}, "unsup.");
        take(u, "percentile", cfg.unsup.threshold_percentile, "unsup.");
        take(u, "alpha", cfg.unsup.alpha, "unsup.");
        take(u, "lambda", cfg.unsup.lambda, "unsup.");
        take(u, "exact_threshold", cfg.unsup.exact_threshold, "unsup.");
        take(u, "negative_sample_cap", cfg.unsup.negative_sample_cap, "unsup.");
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    RunConfig cfg;
    merge_json(cfg, doc);
    return cfg;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write config " + path.string());
    out << to_json(cfg).dump(2) << '\n';
}

}  // namespace unprompt
