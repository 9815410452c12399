#pragma once

#include <map>
#include <string>

#include "taskvid/net.hpp"
#include "taskvid/pipeline.hpp"

namespace taskvid {

// Declarative experiment file, TOML-style sections with key = value lines.
// Defaults follow the published fine-tuning recipe (AdamW, lr 1e-4,
// betas 0.90/0.95, weight decay 1e-3, eps 1e-8, grad clip 1.0, batch 2,
// LoRA rank 64 / alpha 32 / QKVO, seed 42) with desk-scale model overrides.
// Unknown sections or keys are rejected.
struct ExperimentConfig {
    ModelConfig model;
    double beta_start = 1e-4;
    double beta_end = 0.035;
    LoraSpec lora{TargetSpec::QKVO, 64, 32.0, 42};
    InterpMethod interp;
    AdamWConfig optim;
    int steps = 1000;
    int batch = 2;
    uint64_t seed = 42;
    int eval_every = 0;
    int corpus_size = 256;
    uint64_t data_seed = 7;
    int infer_steps = 0;  // 0 = full chain

    TrainRunConfig run() const;
    uint64_t hash() const;
};

ExperimentConfig default_experiment_config();
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& cfg);

// Raw section -> key -> value view of a TOML-subset file (exposed for tests).
std::map<std::string, std::map<std::string, std::string>> parse_toml_subset(const std::string& text);

}  // namespace taskvid
