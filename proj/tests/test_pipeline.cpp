#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "taskvid/config.hpp"
#include "taskvid/errors.hpp"
#include "taskvid/pipeline.hpp"
#include "taskvid/taskio.hpp"

using namespace taskvid;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.frames = 2;
    c.height = 8;
    c.width = 8;
    c.patch = 4;
    c.dim = 16;
    c.heads = 2;
    c.blocks = 1;
    c.tsteps = 8;
    return c;
}

fs::path test_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "taskvid_tests" / name;
    fs::create_directories(p);
    return p;
}

Checkpoint tiny_base(int steps = 4) {
    TrainRunConfig run;
    run.steps = steps;
    run.batch = 1;
    run.seed = 42;
    run.corpus_size = 4;
    run.optim.lr = 1e-3;
    return pretrain_base(tiny_config(), run, 1e-4, 0.05);
}

}  // namespace

TEST_CASE("checkpoint save/load roundtrip is bit-exact") {
    Checkpoint ckpt = tiny_base();
    auto dir = test_dir("ckpt_roundtrip");
    auto path = (dir / "base.ckpt").string();
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);

    CHECK(back.kind == Checkpoint::Kind::Base);
    CHECK(back.config == ckpt.config);
    CHECK(back.step == ckpt.step);
    CHECK(back.seed == ckpt.seed);
    REQUIRE(params_hash(back.base) == params_hash(ckpt.base));
    REQUIRE(back.opt.step == ckpt.opt.step);
    for (const auto& [name, t] : ckpt.opt.m) REQUIRE(back.opt.m.at(name).v == t.v);

    // forward parity after reload
    RngStream rng(3);
    Video v(ckpt.config.frames, ckpt.config.height, ckpt.config.width);
    for (auto& x : v.px) x = static_cast<float>(rng.uniform(-1, 1));
    Image cond = v.frame_image(0);
    Video a = denoiser_forward(ckpt.base, nullptr, v, 2, cond);
    Video b = denoiser_forward(back.base, nullptr, v, 2, cond);
    REQUIRE(video_hash(a) == video_hash(b));
}

TEST_CASE("corrupting one byte is detected by the checksum") {
    Checkpoint ckpt = tiny_base();
    auto dir = test_dir("ckpt_corrupt");
    auto path = (dir / "base.ckpt").string();
    save_checkpoint(path, ckpt);

    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(0, std::ios::end);
    auto size = static_cast<long>(f.tellg());
    f.seekp(size / 2);
    char byte = 0;
    f.seekg(size / 2);
    f.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0x01);
    f.seekp(size / 2);
    f.write(&byte, 1);
    f.close();

    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), IoError);
}

TEST_CASE("pretrain resume reproduces subsequent losses bit-exactly") {
    ModelConfig cfg = tiny_config();
    TrainRunConfig run;
    run.steps = 6;
    run.batch = 1;
    run.seed = 9;
    run.corpus_size = 4;
    run.optim.lr = 1e-3;

    std::vector<double> full_losses;
    Checkpoint full = pretrain_base(cfg, run, 1e-4, 0.05,
                                    [&](const StepLog& e) { full_losses.push_back(e.loss); });

    TrainRunConfig half = run;
    half.steps = 3;
    Checkpoint part = pretrain_base(cfg, half, 1e-4, 0.05);
    std::vector<double> resumed_losses;
    Checkpoint resumed = pretrain_base(cfg, run, 1e-4, 0.05,
                                       [&](const StepLog& e) { resumed_losses.push_back(e.loss); }, &part);

    REQUIRE(resumed_losses.size() == 3);
    for (int i = 0; i < 3; ++i) REQUIRE(resumed_losses[static_cast<size_t>(i)] == full_losses[static_cast<size_t>(i) + 3]);
    REQUIRE(params_hash(resumed.base) == params_hash(full.base));
}

TEST_CASE("finetune trains only the adapter and keeps the base frozen") {
    Checkpoint base = tiny_base();
    uint64_t base_hash = params_hash(base.base);

    TaskSet task = generate_synthetic_tasks(TaskKind::Generic, 2, 1, 5, 8, 8);
    TrainRunConfig run;
    run.steps = 4;
    run.batch = 1;
    run.seed = 11;
    run.optim.lr = 1e-3;
    LoraSpec spec{TargetSpec::QKVO, 4, 32.0, 12};

    Checkpoint adapter = finetune_lora(base, task, base.config.frames, spec, run);
    CHECK(adapter.kind == Checkpoint::Kind::Adapter);
    CHECK(params_hash(base.base) == base_hash);
    CHECK(adapter.base_params_hash == base_hash);

    // adapter actually moved off zero
    bool any_nonzero = false;
    for (const auto& [name, ab] : adapter.adapter.layers)
        for (float x : ab.second.v) any_nonzero = any_nonzero || x != 0.0f;
    CHECK(any_nonzero);

    SUBCASE("same seed gives identical adapter hashes") {
        Checkpoint again = finetune_lora(base, task, base.config.frames, spec, run);
        CHECK(adapter_hash(again.adapter) == adapter_hash(adapter.adapter));
    }
    SUBCASE("adapter checkpoints roundtrip") {
        auto dir = test_dir("adapter_roundtrip");
        auto path = (dir / "adapter.ckpt").string();
        save_checkpoint(path, adapter);
        Checkpoint back = load_checkpoint(path);
        CHECK(back.kind == Checkpoint::Kind::Adapter);
        CHECK(adapter_hash(back.adapter) == adapter_hash(adapter.adapter));
        CHECK(back.adapter.rank == 4);
        CHECK_NOTHROW(verify_adapter_matches(base, back));
    }
    SUBCASE("adapter against a mismatched base config is rejected") {
        ModelConfig other = tiny_config();
        other.dim = 32;
        TrainRunConfig prun;
        prun.steps = 1;
        prun.batch = 1;
        prun.corpus_size = 2;
        Checkpoint other_base = pretrain_base(other, prun, 1e-4, 0.05);
        CHECK_THROWS_AS(verify_adapter_matches(other_base, adapter), ValidationError);
    }
    SUBCASE("adapter against same config but different weights is rejected") {
        TrainRunConfig prun;
        prun.steps = 2;
        prun.batch = 1;
        prun.seed = 1234;  // different pretraining -> different weights
        prun.corpus_size = 2;
        prun.optim.lr = 1e-3;
        Checkpoint other_base = pretrain_base(tiny_config(), prun, 1e-4, 0.05);
        CHECK_THROWS_AS(verify_adapter_matches(other_base, adapter), ValidationError);
    }
}

TEST_CASE("infer returns the final frame and anchors the first") {
    Checkpoint base = tiny_base();
    RngStream rng(21);
    Image x(8, 8);
    for (auto& v : x.px) v = static_cast<float>(rng.uniform(-1, 1));

    InferResult r = infer(base, nullptr, x, 99);
    // prediction is exactly frame F of the video
    for (size_t i = 0; i < r.prediction.px.size(); ++i)
        REQUIRE(r.prediction.px[i] == r.video.frame(r.video.f - 1)[i]);
    // frame 1 equals the conditioning input within anchoring tolerance
    for (size_t i = 0; i < x.px.size(); ++i) REQUIRE(std::abs(r.video.frame(0)[i] - x.px[i]) <= 1e-5f);

    InferResult r2 = infer(base, nullptr, x, 99);
    REQUIRE(image_hash(r2.prediction) == image_hash(r.prediction));
}

TEST_CASE("task directory roundtrip") {
    auto dir = test_dir("taskdir");
    for (TaskKind k : {TaskKind::Segmentation, TaskKind::Pose, TaskKind::Arc,
                       TaskKind::ClassificationGrid}) {
        TaskSet t = generate_synthetic_tasks(k, 2, 1, 31, 32, 32);
        auto sub = (dir / task_kind_name(k)).string();
        save_taskset(sub, t);
        TaskSet back = load_taskset(sub);
        CHECK(back.kind == t.kind);
        CHECK(back.train.size() == t.train.size());
        CHECK(back.test.size() == t.test.size());
        // PNG quantization is exact for byte-derived values
        for (size_t i = 0; i < t.train.size(); ++i) {
            REQUIRE(back.train[i].input.h == t.train[i].input.h);
            for (size_t j = 0; j < t.train[i].input.px.size(); ++j)
                REQUIRE(back.train[i].input.px[j] ==
                        doctest::Approx(t.train[i].input.px[j]).epsilon(1.0 / 255.0));
        }
        if (k == TaskKind::Segmentation) {
            REQUIRE(back.train_truth.masks.size() == t.train_truth.masks.size());
            CHECK(back.train_truth.masks[0] == t.train_truth.masks[0]);
        }
        if (k == TaskKind::Arc) {
            REQUIRE(back.train_truth.out_grids.size() == t.train_truth.out_grids.size());
            CHECK(back.train_truth.out_grids[0] == t.train_truth.out_grids[0]);
        }
        if (k == TaskKind::Pose) {
            REQUIRE(back.train_truth.poses.size() == t.train_truth.poses.size());
            CHECK(back.train_truth.poses[0].total() == t.train_truth.poses[0].total());
        }
        if (k == TaskKind::ClassificationGrid) {
            REQUIRE(back.train_truth.labels.size() == t.train_truth.labels.size());
            CHECK(back.train_truth.labels[0] == t.train_truth.labels[0]);
        }
    }
}

TEST_CASE("arc json load and save") {
    auto dir = test_dir("arcjson");
    auto path = (dir / "task.json").string();
    {
        std::ofstream out(path);
        out << R"({"train": [{"input": [[1,0],[0,2]], "output": [[2,0],[0,1]]}],
                   "test": [{"input": [[1,1],[2,2]], "output": [[2,2],[1,1]]}]})";
    }
    TaskSet t = load_arc_json(path, 32, 32);
    CHECK(t.kind == TaskKind::Arc);
    REQUIRE(t.train.size() == 1);
    REQUIRE(t.test.size() == 1);
    CHECK(t.train_truth.in_grids[0].at(0, 0) == 1);
    CHECK(t.train_truth.out_grids[0].at(0, 0) == 2);
    // encoded images decode back to the same grids
    CHECK(grid_decode(t.train[0].input, 2, 2) == t.train_truth.in_grids[0]);
    CHECK(grid_decode(t.train[0].target, 2, 2) == t.train_truth.out_grids[0]);

    auto out_path = (dir / "back.json").string();
    save_arc_json(out_path, t);
    TaskSet t2 = load_arc_json(out_path, 32, 32);
    CHECK(t2.train_truth.out_grids[0] == t.train_truth.out_grids[0]);

    SUBCASE("malformed json is an io error") {
        auto bad = (dir / "bad.json").string();
        std::ofstream(bad) << "{not json";
        CHECK_THROWS_AS(load_arc_json(bad, 32, 32), IoError);
    }
}

TEST_CASE("video directory persistence") {
    auto dir = test_dir("videodir");
    RngStream rng(71);
    Video v(3, 8, 8);
    for (auto& x : v.px) x = from_byte(to_byte(static_cast<float>(rng.uniform(-1, 1))));
    save_video((dir / "v").string(), v, "linear");
    Video back = load_video((dir / "v").string());
    REQUIRE(back.f == 3);
    REQUIRE(back.px == v.px);
}

TEST_CASE("experiment config parsing") {
    auto dir = test_dir("config");
    auto path = (dir / "exp.toml").string();

    SUBCASE("defaults roundtrip through save and load") {
        ExperimentConfig cfg = default_experiment_config();
        save_experiment_config(path, cfg);
        ExperimentConfig back = load_experiment_config(path);
        CHECK(back.hash() == cfg.hash());
        CHECK(back.model == cfg.model);
        CHECK(back.optim.lr == cfg.optim.lr);
    }
    SUBCASE("published defaults are in place") {
        ExperimentConfig cfg = default_experiment_config();
        CHECK(cfg.optim.lr == 1e-4);
        CHECK(cfg.optim.beta1 == 0.90);
        CHECK(cfg.optim.beta2 == 0.95);
        CHECK(cfg.optim.weight_decay == 1e-3);
        CHECK(cfg.optim.eps == 1e-8);
        CHECK(cfg.optim.max_grad_norm == 1.0);
        CHECK(cfg.batch == 2);
        CHECK(cfg.seed == 42);
        CHECK(cfg.lora.rank == 64);
        CHECK(cfg.lora.alpha == 32.0);
        CHECK(cfg.lora.targets == TargetSpec::QKVO);
        CHECK(cfg.model.frames == 9);
    }
    SUBCASE("unknown keys are rejected") {
        std::ofstream(path) << "[train]\nsteps = 10\nbogus = 1\n";
        CHECK_THROWS_WITH_AS(load_experiment_config(path), doctest::Contains("bogus"), ValidationError);
        std::ofstream(path) << "[nonsense]\nx = 1\n";
        CHECK_THROWS_AS(load_experiment_config(path), ValidationError);
    }
    SUBCASE("values parse with comments and strings") {
        std::ofstream(path) << "# comment\n[model]\ndim = 32 # inline\n[interp]\nmethod = \"discrete\"\n";
        ExperimentConfig cfg = load_experiment_config(path);
        CHECK(cfg.model.dim == 32);
        CHECK(cfg.interp.variant == InterpVariant::Discrete);
    }
}

TEST_CASE("train run config validation") {
    TrainRunConfig run;
    run.steps = 10;
    run.eval_every = 3;  // does not divide
    CHECK_THROWS_AS(run.validate(), ValidationError);
    run.eval_every = 5;
    CHECK_NOTHROW(run.validate());
}
