#pragma once

#include <functional>
#include <optional>
#include <string>

#include "taskvid/checkpoint.hpp"
#include "taskvid/diffusion.hpp"
#include "taskvid/interp.hpp"
#include "taskvid/synth.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Training runs
// ---------------------------------------------------------------------------

struct TrainRunConfig {
    int steps = 500;
    int batch = 2;
    uint64_t seed = 42;
    int eval_every = 0;  // 0 disables snapshots; otherwise must divide steps
    AdamWConfig optim;   // constant learning-rate schedule
    InterpMethod interp;
    // pretraining corpus
    int corpus_size = 256;
    uint64_t data_seed = 7;

    void validate() const;
};

struct StepLog {
    int64_t step = 0;
    double loss = 0;
    double grad_norm = 0;
    int64_t unix_ms = 0;
};

using StepSink = std::function<void(const StepLog&)>;
using SnapshotSink = std::function<void(int64_t step, const DenoiserParams& base, const LoraAdapter* lora)>;

// Writes one JSON object per line: {"step":..,"loss":..,"grad_norm":..,"ts":..}
class JsonlLogger {
public:
    explicit JsonlLogger(const std::string& path);
    void log(const StepLog& e);

private:
    std::string path_;
};

// Base pretraining on the procedurally generated moving-shape corpus,
// conditioned on each clip's first frame. Deterministic given the config.
// Pass `resume` to continue a run bit-exactly from its recorded step.
Checkpoint pretrain_base(const ModelConfig& cfg, const TrainRunConfig& run, double beta_start,
                         double beta_end, const StepSink& on_step = {},
                         const Checkpoint* resume = nullptr);

struct LoraSpec {
    TargetSpec targets = TargetSpec::QKVO;
    int rank = 16;
    double alpha = 32.0;
    uint64_t seed = 42;
};

// Few-shot adaptation: only adapter tensors train; the base is frozen and a
// hash check enforces it (violation is a hard failure).
Checkpoint finetune_lora(const Checkpoint& base, const TaskSet& tasks, int frames,
                         const LoraSpec& lora_spec, const TrainRunConfig& run,
                         const StepSink& on_step = {}, const SnapshotSink& on_snapshot = {});

// Inference: conditioning from x_test, ancestral sampling, prediction is the
// final frame of the generated transition video.
struct InferResult {
    Video video;
    Image prediction;
};

InferResult infer(const DenoiserParams& base, const LoraAdapter* lora, const Image& x_test,
                  const NoiseSchedule& sched, uint64_t seed, int steps = 0);

InferResult infer(const Checkpoint& base, const Checkpoint* adapter, const Image& x_test,
                  uint64_t seed, int steps = 0);

// ---------------------------------------------------------------------------
// Snapshot evaluation for grid tasks (ARC protocols)
// ---------------------------------------------------------------------------

struct ArcSnapshot {
    int64_t step = 0;
    bool train_correct = false;
    std::vector<Grid> train_preds, test_preds;
};

// Runs inference on every train and test input of an arc task and decodes
// the predictions at the known output shapes.
ArcSnapshot evaluate_arc_snapshot(const DenoiserParams& base, const LoraAdapter* lora,
                                  const TaskSet& task, const NoiseSchedule& sched, int64_t step,
                                  uint64_t seed, int infer_steps);

// Video persistence: numbered PNG frames plus a small JSON manifest.
void save_video(const std::string& dir, const Video& v, const std::string& method_name);
Video load_video(const std::string& dir);

}  // namespace taskvid
