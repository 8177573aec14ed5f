#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "unprompt/model.hpp"
#include "unprompt/pretrain.hpp"
#include "unprompt/prompt_train.hpp"

namespace unprompt {

// Every hyperparameter and the single seed behind a run. Defaults follow the
// published implementation details; lambda has no published value.
struct RunConfig {
    Index d_prime = kDefaultDPrime;
    Index d_h = 128;
    Index K = 1;
    Nonlinearity nonlinearity = Nonlinearity::Relu;
    AugmentationConfig augment;
    PretrainConfig pretrain;
    PromptTrainConfig prompt;
    UnsupConfig unsup;
    std::uint64_t seed = 0;

    ModelShape shape() const { return {d_prime, d_h, K}; }
    void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
// Missing keys keep their current value in `cfg`; unknown keys are a Config error.
void merge_json(RunConfig& cfg, const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace unprompt
