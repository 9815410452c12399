#include "taskvid/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "taskvid/errors.hpp"
#include "taskvid/lora.hpp"
#include "taskvid/png_io.hpp"

namespace taskvid {

namespace fs = std::filesystem;

void TrainRunConfig::validate() const {
    if (steps < 1) throw ValidationError("TrainRunConfig: steps must be >= 1");
    if (batch < 1) throw ValidationError("TrainRunConfig: batch must be >= 1");
    if (eval_every < 0 || (eval_every > 0 && steps % eval_every != 0))
        throw ValidationError("TrainRunConfig: eval_every must divide steps");
    if (corpus_size < 1) throw ValidationError("TrainRunConfig: corpus_size must be >= 1");
}

JsonlLogger::JsonlLogger(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw IoError("JsonlLogger: cannot open " + path_);
}

void JsonlLogger::log(const StepLog& e) {
    std::ofstream out(path_, std::ios::app);
    nlohmann::json j{{"step", e.step}, {"loss", e.loss}, {"grad_norm", e.grad_norm}, {"ts", e.unix_ms}};
    out << j.dump() << "\n";
}

namespace {

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

Video draw_eps(int F, int H, int W, RngStream& rng) {
    Video e(F, H, W);
    for (auto& x : e.px) x = static_cast<float>(rng.normal());
    return e;
}

// One optimization step over `batch` (video, t, eps) draws; gradients are
// averaged by seeding each sample's backward with 1/batch.
struct StepOutcome {
    double loss = 0;
    double grad_norm = 0;
};

template <typename PickVideo>
StepOutcome run_train_step(DenoiserParams& params, const LoraAdapter* lora, TrainMode mode,
                           const NoiseSchedule& sched, const TrainRunConfig& run, int64_t step,
                           PickVideo&& pick_video, const std::map<std::string, TensorF*>& trainable,
                           AdamWState& opt) {
    RngStream rng(derive_seed(run.seed, static_cast<uint64_t>(step), 0x57e9));
    std::map<std::string, TensorF> grads;
    double loss_sum = 0;
    for (int b = 0; b < run.batch; ++b) {
        const Video& v0 = pick_video(rng);
        int t = 1 + static_cast<int>(rng.randint(sched.T));
        Video eps = draw_eps(v0.f, v0.h, v0.w, rng);
        Image cond = v0.frame_image(0);

        ForwardTape<float> tape;
        float loss = diffusion_training_loss(params, lora, v0, cond, t, eps, sched, &tape);
        if (!std::isfinite(loss))
            throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
        loss_sum += loss;
        auto g = denoiser_backward(params, lora, tape, mode, 1.0f / static_cast<float>(run.batch));
        for (auto& [name, grad] : g) {
            auto it = grads.find(name);
            if (it == grads.end())
                grads.emplace(name, std::move(grad));
            else
                it->second.add_(grad);
        }
    }

    StepOutcome out;
    out.loss = loss_sum / run.batch;
    std::string err;
    if (!adamw_step(trainable, grads, opt, run.optim, &out.grad_norm, &err))
        throw NumericError("optimizer rejected step " + std::to_string(step) + ": " + err);
    return out;
}

std::map<std::string, TensorF*> base_trainable(DenoiserParams& p) {
    std::map<std::string, TensorF*> m;
    for (auto& [name, t] : p.tensors) m.emplace(name, &t);
    return m;
}

std::map<std::string, TensorF*> lora_trainable(LoraAdapter& a) {
    std::map<std::string, TensorF*> m;
    for (auto& [name, ab] : a.layers) {
        m.emplace("lora." + name + ".A", &ab.first);
        m.emplace("lora." + name + ".B", &ab.second);
    }
    return m;
}

}  // namespace

Checkpoint pretrain_base(const ModelConfig& cfg, const TrainRunConfig& run, double beta_start,
                         double beta_end, const StepSink& on_step, const Checkpoint* resume) {
    cfg.validate();
    run.validate();
    NoiseSchedule sched = make_schedule(cfg.tsteps, beta_start, beta_end);

    Checkpoint ckpt;
    if (resume) {
        if (resume->kind != Checkpoint::Kind::Base)
            throw ValidationError("pretrain_base: resume checkpoint is not a base checkpoint");
        if (!(resume->config == cfg))
            throw ValidationError("pretrain_base: resume checkpoint has a different model config");
        ckpt = *resume;
    } else {
        ckpt.kind = Checkpoint::Kind::Base;
        ckpt.config = cfg;
        ckpt.beta_start = beta_start;
        ckpt.beta_end = beta_end;
        ckpt.seed = run.seed;
        ckpt.base = init_params<float>(cfg, run.seed);
        ckpt.step = 0;
    }

    auto trainable = base_trainable(ckpt.base);
    // corpus clips are generated on demand: pure function of (data_seed, index)
    std::vector<Video> cache(static_cast<size_t>(std::min(run.corpus_size, 512)));
    std::vector<bool> cached(cache.size(), false);
    auto pick = [&](RngStream& rng) -> const Video& {
        int idx = static_cast<int>(rng.randint(run.corpus_size));
        uint64_t vid_seed = derive_seed(run.data_seed, static_cast<uint64_t>(idx), 0xc02b);
        if (static_cast<size_t>(idx) < cache.size()) {
            if (!cached[static_cast<size_t>(idx)]) {
                cache[static_cast<size_t>(idx)] =
                    synth_pretrain_video(cfg.frames, cfg.height, cfg.width, vid_seed);
                cached[static_cast<size_t>(idx)] = true;
            }
            return cache[static_cast<size_t>(idx)];
        }
        static thread_local Video scratch;
        scratch = synth_pretrain_video(cfg.frames, cfg.height, cfg.width, vid_seed);
        return scratch;
    };

    for (int64_t step = ckpt.step; step < run.steps; ++step) {
        StepOutcome o = run_train_step(ckpt.base, nullptr, TrainMode::Base, sched, run, step, pick,
                                       trainable, ckpt.opt);
        ckpt.step = step + 1;
        if (on_step) on_step({step + 1, o.loss, o.grad_norm, now_ms()});
    }
    return ckpt;
}

Checkpoint finetune_lora(const Checkpoint& base, const TaskSet& tasks, int frames,
                         const LoraSpec& lora_spec, const TrainRunConfig& run, const StepSink& on_step,
                         const SnapshotSink& on_snapshot) {
    if (base.kind != Checkpoint::Kind::Base) throw ValidationError("finetune_lora: need a base checkpoint");
    run.validate();
    const ModelConfig& cfg = base.config;
    if (frames != cfg.frames)
        throw ValidationError("finetune_lora: frame count must match the base model");
    if (tasks.height != cfg.height || tasks.width != cfg.width)
        throw ValidationError("finetune_lora: task canvas does not match the base model");

    NoiseSchedule sched = base.schedule();
    std::vector<Video> videos = build_video_dataset(tasks, frames, run.interp);

    uint64_t base_hash_before = params_hash(base.base);
    DenoiserParams params = base.base;  // frozen; adapters carry all training

    Checkpoint out;
    out.kind = Checkpoint::Kind::Adapter;
    out.config = cfg;
    out.beta_start = base.beta_start;
    out.beta_end = base.beta_end;
    out.seed = run.seed;
    out.base_params_hash = base_hash_before;
    out.adapter = lora_attach(params, lora_spec.targets, lora_spec.rank, lora_spec.alpha, lora_spec.seed);

    auto trainable = lora_trainable(out.adapter);
    auto pick = [&](RngStream& rng) -> const Video& {
        return videos[static_cast<size_t>(rng.randint(static_cast<int64_t>(videos.size())))];
    };

    for (int64_t step = 0; step < run.steps; ++step) {
        StepOutcome o = run_train_step(params, &out.adapter, TrainMode::LoraOnly, sched, run, step, pick,
                                       trainable, out.opt);
        out.step = step + 1;
        if (on_step) on_step({step + 1, o.loss, o.grad_norm, now_ms()});
        if (run.eval_every > 0 && (step + 1) % run.eval_every == 0 && on_snapshot)
            on_snapshot(step + 1, params, &out.adapter);
    }

    if (params_hash(params) != base_hash_before)
        throw NumericError("finetune_lora: freeze discipline violated, base weights changed");
    return out;
}

InferResult infer(const DenoiserParams& base, const LoraAdapter* lora, const Image& x_test,
                  const NoiseSchedule& sched, uint64_t seed, int steps) {
    SampleOptions opt;
    opt.steps = steps;
    Video v = sample(base, lora, x_test, sched, seed, opt);
    InferResult r;
    r.prediction = v.frame_image(v.f - 1);
    r.video = std::move(v);
    return r;
}

InferResult infer(const Checkpoint& base, const Checkpoint* adapter, const Image& x_test, uint64_t seed,
                  int steps) {
    if (base.kind != Checkpoint::Kind::Base) throw ValidationError("infer: need a base checkpoint");
    if (adapter) verify_adapter_matches(base, *adapter);
    return infer(base.base, adapter ? &adapter->adapter : nullptr, x_test, base.schedule(), seed, steps);
}

ArcSnapshot evaluate_arc_snapshot(const DenoiserParams& base, const LoraAdapter* lora,
                                  const TaskSet& task, const NoiseSchedule& sched, int64_t step,
                                  uint64_t seed, int infer_steps) {
    if (task.kind != TaskKind::Arc) throw ValidationError("evaluate_arc_snapshot: not an arc task");
    ArcSnapshot snap;
    snap.step = step;
    snap.train_correct = true;
    for (size_t i = 0; i < task.train.size(); ++i) {
        auto r = infer(base, lora, task.train[i].input, sched,
                       derive_seed(seed, static_cast<uint64_t>(step), i), infer_steps);
        const Grid& truth = task.train_truth.out_grids[i];
        Grid pred = grid_decode(r.prediction, truth.rows, truth.cols);
        snap.train_correct = snap.train_correct && pred == truth;
        snap.train_preds.push_back(std::move(pred));
    }
    for (size_t i = 0; i < task.test.size(); ++i) {
        auto r = infer(base, lora, task.test[i].input, sched,
                       derive_seed(seed, static_cast<uint64_t>(step), 0x7e57 + i), infer_steps);
        const Grid& truth = task.test_truth.out_grids[i];
        snap.test_preds.push_back(grid_decode(r.prediction, truth.rows, truth.cols));
    }
    return snap;
}

void save_video(const std::string& dir, const Video& v, const std::string& method_name) {
    fs::create_directories(dir);
    char buf[32];
    for (int f = 0; f < v.f; ++f) {
        std::snprintf(buf, sizeof buf, "frame_%03d.png", f);
        write_png((fs::path(dir) / buf).string(), v.frame_image(f));
    }
    nlohmann::json j{{"frames", v.f}, {"height", v.h}, {"width", v.w}, {"method", method_name}};
    std::ofstream out(fs::path(dir) / "video.json");
    if (!out) throw IoError("save_video: cannot write manifest under " + dir);
    out << j.dump(1) << "\n";
}

Video load_video(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "video.json");
    if (!in) throw IoError("load_video: cannot open " + dir + "/video.json");
    nlohmann::json j;
    in >> j;
    Video v(j.at("frames"), j.at("height"), j.at("width"));
    char buf[32];
    for (int f = 0; f < v.f; ++f) {
        std::snprintf(buf, sizeof buf, "frame_%03d.png", f);
        v.set_frame(f, read_png((fs::path(dir) / buf).string()));
    }
    return v;
}

}  // namespace taskvid
