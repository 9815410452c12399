// taskvid: few-shot visual tasks as transition videos.
//
// Subcommands: make-dataset, make-videos, pretrain, finetune, infer, eval,
// sweep, param-count, emit-config. Exit codes: 0 ok, 2 validation error,
// 3 numeric failure, 4 i/o error.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "taskvid/config.hpp"
#include "taskvid/errors.hpp"
#include "taskvid/eval.hpp"
#include "taskvid/lora.hpp"
#include "taskvid/pipeline.hpp"
#include "taskvid/plots.hpp"
#include "taskvid/png_io.hpp"
#include "taskvid/taskio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace taskvid;

namespace {

// --out paths resolve against TASKVID_OUT_ROOT when set and relative
std::string resolve_out(const std::string& path) {
    const char* root = std::getenv("TASKVID_OUT_ROOT");
    if (!root || path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

void write_run_meta(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
                    const json& extra = json::object()) {
    fs::create_directories(dir);
    json j{{"command", command}, {"config_hash", hash_hex(cfg.hash())}, {"seed", cfg.seed}};
    for (auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream out(dir / "run.json");
    out << j.dump(1) << "\n";
}

ExperimentConfig config_from_flag(const std::string& config_path) {
    return config_path.empty() ? default_experiment_config() : load_experiment_config(config_path);
}

int clamp_rank_with_warning(const ExperimentConfig& cfg, TargetSpec targets, int rank) {
    int cap = lora_rank_cap(cfg.model, targets);
    if (rank > cap) {
        std::cerr << "warning: rank " << rank << " exceeds min(d,k)/2 cap " << cap << ", using " << cap
                  << "\n";
        return cap;
    }
    return rank;
}

// fine-tune step heuristic by sample count (quarter-scale schedule)
int default_finetune_steps(int n) {
    if (n <= 5) return 250;
    if (n <= 10) return 500;
    return 1000;
}

struct SnapshotStore {
    fs::path dir;
    const TaskSet* task = nullptr;
    NoiseSchedule sched;
    int infer_steps = 40;
    uint64_t seed = 0;
    std::vector<ArcSnapshot> snaps;

    void capture(int64_t step, const DenoiserParams& base, const LoraAdapter* lora) {
        ArcSnapshot snap = evaluate_arc_snapshot(base, lora, *task, sched, step, seed, infer_steps);
        fs::path sdir = dir / ("step_" + std::to_string(step));
        fs::create_directories(sdir);
        json grids;
        grids["step"] = step;
        grids["train_correct"] = snap.train_correct;
        auto dump_grids = [](const std::vector<Grid>& gs) {
            json arr = json::array();
            for (const auto& g : gs) {
                json rows = json::array();
                for (int r = 0; r < g.rows; ++r) {
                    json row = json::array();
                    for (int c = 0; c < g.cols; ++c) row.push_back(g.at(r, c));
                    rows.push_back(row);
                }
                arr.push_back(rows);
            }
            return arr;
        };
        grids["train_preds"] = dump_grids(snap.train_preds);
        grids["test_preds"] = dump_grids(snap.test_preds);
        std::ofstream(sdir / "grids.json") << grids.dump(1) << "\n";
        // rendered predictions for inspection
        for (size_t i = 0; i < snap.test_preds.size(); ++i) {
            const Grid& g = snap.test_preds[i];
            write_png((sdir / ("test_" + std::to_string(i) + "_pred.png")).string(),
                      grid_encode(g, task->height, task->width));
        }
        snaps.push_back(std::move(snap));
    }

    void write_index() const {
        json idx = json::array();
        for (const auto& s : snaps)
            idx.push_back({{"step", s.step}, {"train_correct", s.train_correct}});
        std::ofstream(dir / "index.json") << idx.dump(1) << "\n";
    }
};

// re-read stored snapshots for the eval command
struct StoredSnapshots {
    std::vector<int64_t> steps;
    std::vector<bool> train_correct;
    std::vector<std::vector<Grid>> test_preds;  // [snapshot][input]
};

StoredSnapshots read_snapshots(const fs::path& run_dir) {
    std::ifstream in(run_dir / "snapshots" / "index.json");
    if (!in) throw IoError("eval: no snapshots/index.json under " + run_dir.string());
    json idx;
    in >> idx;
    StoredSnapshots s;
    for (const auto& e : idx) {
        int64_t step = e.at("step");
        s.steps.push_back(step);
        s.train_correct.push_back(e.at("train_correct").get<bool>());
        std::ifstream gin(run_dir / "snapshots" / ("step_" + std::to_string(step)) / "grids.json");
        if (!gin) throw IoError("eval: missing grids.json for snapshot step " + std::to_string(step));
        json grids;
        gin >> grids;
        std::vector<Grid> preds;
        for (const auto& rows : grids.at("test_preds")) {
            Grid g(static_cast<int>(rows.size()), static_cast<int>(rows.at(0).size()));
            for (int r = 0; r < g.rows; ++r)
                for (int c = 0; c < g.cols; ++c) g.at(r, c) = rows.at(static_cast<size_t>(r)).at(static_cast<size_t>(c));
            preds.push_back(std::move(g));
        }
        s.test_preds.push_back(std::move(preds));
    }
    return s;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

int cmd_make_dataset(const std::string& kind_name, int n, int n_test, uint64_t seed, int height,
                     int width, const std::string& arc_json, const std::string& out) {
    fs::path dir = resolve_out(out);
    TaskSet task;
    if (!arc_json.empty()) {
        task = load_arc_json(arc_json, height, width);
    } else {
        auto kind = task_kind_from_name(kind_name);
        if (!kind) throw ValidationError("make-dataset: unknown kind '" + kind_name + "'");
        task = generate_synthetic_tasks(*kind, n, n_test, seed, height, width);
    }
    save_taskset(dir.string(), task);
    std::cout << "wrote " << task.train.size() << " train / " << task.test.size() << " test pairs to "
              << dir.string() << "\n";
    return 0;
}

int cmd_make_videos(const std::string& task_dir, int frames, const std::string& method,
                    const std::string& out) {
    TaskSet task = load_taskset(task_dir);
    auto variant = interp_variant_from_name(method);
    if (!variant) throw ValidationError("make-videos: unknown interpolation method '" + method + "'");
    InterpMethod m{*variant};
    auto videos = build_video_dataset(task, frames, m);
    fs::path dir = resolve_out(out);
    for (size_t i = 0; i < videos.size(); ++i)
        save_video((dir / ("video_" + std::to_string(i))).string(), videos[i], method);
    std::cout << "wrote " << videos.size() << " transition videos to " << dir.string() << "\n";
    return 0;
}

int cmd_pretrain(const std::string& config_path, int steps_override, const std::string& out,
                 const std::string& log_path, const std::string& resume_path) {
    ExperimentConfig cfg = config_from_flag(config_path);
    if (steps_override > 0) cfg.steps = steps_override;
    TrainRunConfig run = cfg.run();

    std::optional<JsonlLogger> logger;
    if (!log_path.empty()) logger.emplace(resolve_out(log_path));
    std::optional<Checkpoint> resume;
    if (!resume_path.empty()) resume = load_checkpoint(resume_path);

    auto t0 = std::chrono::steady_clock::now();
    Checkpoint ckpt = pretrain_base(
        cfg.model, run, cfg.beta_start, cfg.beta_end,
        [&](const StepLog& e) {
            if (logger) logger->log(e);
            if (e.step % 100 == 0 || e.step == run.steps)
                std::cout << "step " << e.step << "/" << run.steps << " loss " << e.loss << "\n";
        },
        resume ? &*resume : nullptr);
    auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0).count();

    fs::path out_path = resolve_out(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_checkpoint(out_path.string(), ckpt);
    write_run_meta(out_path.parent_path().empty() ? "." : out_path.parent_path(), "pretrain", cfg,
                   {{"base_hash", hash_hex(params_hash(ckpt.base))}, {"seconds", secs}});
    std::cout << "base checkpoint: " << out_path.string() << " (hash " << hash_hex(params_hash(ckpt.base))
              << ")\n";
    return 0;
}

int cmd_finetune(const std::string& base_path, const std::string& task_dir,
                 const std::string& config_path, const std::string& interp_name,
                 const std::string& targets_name, int rank, int steps, uint64_t seed, int eval_every,
                 const std::string& out, const std::string& log_path) {
    Checkpoint base = load_checkpoint(base_path);
    TaskSet task = load_taskset(task_dir);
    ExperimentConfig cfg = config_from_flag(config_path);
    cfg.model = base.config;  // the base fixes the architecture

    if (!interp_name.empty()) {
        auto v = interp_variant_from_name(interp_name);
        if (!v) throw ValidationError("finetune: unknown interpolation method '" + interp_name + "'");
        cfg.interp.variant = *v;
    }
    if (!targets_name.empty()) {
        auto t = target_spec_from_name(targets_name);
        if (!t) throw ValidationError("finetune: unknown lora target set '" + targets_name + "'");
        cfg.lora.targets = *t;
    }
    if (rank > 0) cfg.lora.rank = rank;
    cfg.lora.rank = clamp_rank_with_warning(cfg, cfg.lora.targets, cfg.lora.rank);
    if (steps > 0) cfg.steps = steps;
    else cfg.steps = default_finetune_steps(static_cast<int>(task.train.size()));
    if (seed != 0) cfg.seed = seed;
    cfg.eval_every = eval_every;

    TrainRunConfig run = cfg.run();
    fs::path out_path = resolve_out(out);
    fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    fs::create_directories(out_dir);

    std::optional<JsonlLogger> logger;
    if (!log_path.empty()) logger.emplace(resolve_out(log_path));

    SnapshotStore snaps;
    SnapshotSink snap_sink;
    if (eval_every > 0 && task.kind == TaskKind::Arc) {
        snaps.dir = out_dir / "snapshots";
        snaps.task = &task;
        snaps.sched = base.schedule();
        snaps.infer_steps = cfg.infer_steps > 0 ? cfg.infer_steps : 40;
        snaps.seed = cfg.seed;
        snap_sink = [&](int64_t step, const DenoiserParams& p, const LoraAdapter* l) {
            snaps.capture(step, p, l);
        };
    }

    Checkpoint adapter = finetune_lora(
        base, task, base.config.frames, cfg.lora, run,
        [&](const StepLog& e) {
            if (logger) logger->log(e);
            if (e.step % 100 == 0 || e.step == run.steps)
                std::cout << "step " << e.step << "/" << run.steps << " loss " << e.loss << "\n";
        },
        snap_sink);

    if (snap_sink) snaps.write_index();
    save_checkpoint(out_path.string(), adapter);
    write_run_meta(out_dir, "finetune", cfg,
                   {{"task", task.name},
                    {"adapter_hash", hash_hex(adapter_hash(adapter.adapter))},
                    {"base_hash", hash_hex(adapter.base_params_hash)}});
    std::cout << "adapter checkpoint: " << out_path.string() << "\n";
    return 0;
}

int cmd_infer(const std::string& base_path, const std::string& adapter_path,
              const std::string& input_path, uint64_t seed, int steps, const std::string& out) {
    Checkpoint base = load_checkpoint(base_path);
    std::optional<Checkpoint> adapter;
    if (!adapter_path.empty()) adapter = load_checkpoint(adapter_path);
    Image x = read_png(input_path);

    InferResult r = infer(base, adapter ? &*adapter : nullptr, x, seed, steps);
    fs::path dir = resolve_out(out);
    fs::create_directories(dir);
    write_png((dir / "prediction.png").string(), r.prediction);
    save_video((dir / "video").string(), r.video, "sampled");
    json meta{{"seed", seed},
              {"steps", steps == 0 ? base.config.tsteps : steps},
              {"prediction_hash", hash_hex(image_hash(r.prediction))}};
    std::ofstream(dir / "infer.json") << meta.dump(1) << "\n";
    std::cout << "prediction: " << (dir / "prediction.png").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& task_dir, const std::string& predictions, const std::string& metric,
             const std::string& run_dir, const std::string& protocol, int attempts,
             const std::string& out) {
    TaskSet task = load_taskset(task_dir);
    fs::path out_dir = resolve_out(out);
    fs::create_directories(out_dir);

    if (!protocol.empty()) {
        if (task.kind != TaskKind::Arc)
            throw ValidationError("eval: protocol scoring requires an arc task");
        if (run_dir.empty()) throw ValidationError("eval: --protocol needs --run-dir");
        int n_attempts = attempts > 0 ? attempts : (protocol == "conceptarc" ? 3 : 2);
        StoredSnapshots snaps = read_snapshots(run_dir);

        SnapshotChoice choice = snapshot_selection(snaps.train_correct, n_attempts);
        ArcTaskResult result;
        result.name = task.name;
        for (size_t input = 0; input < task.test_truth.out_grids.size(); ++input) {
            ArcInputResult in;
            for (int idx : choice.indices) {
                Grid pred = snaps.test_preds[static_cast<size_t>(idx)][input];
                if (protocol == "conceptarc")
                    pred = conceptarc_black_remap(pred, task.train_truth.out_grids);
                in.attempts.push_back(compare_grids(pred, task.test_truth.out_grids[input]));
            }
            result.inputs.push_back(std::move(in));
        }

        json report;
        report["task"] = task.name;
        report["protocol"] = protocol;
        report["attempts"] = n_attempts;
        report["snapshot_indices"] = choice.indices;
        report["snapshot_padded"] = choice.padded;
        report["from_train_correct"] = choice.from_train_correct;
        if (protocol == "conceptarc") {
            auto flags = conceptarc_input_solved(result, n_attempts);
            int solved = 0;
            json per = json::array();
            for (bool f : flags) {
                per.push_back(f);
                solved += f;
            }
            report["per_input_solved"] = per;
            report["solved_inputs"] = solved;
            report["total_inputs"] = flags.size();
        } else {
            report["solved"] = arc_task_solved(result, n_attempts);
        }
        auto curves = lenient_curves({result}, n_attempts, 8);
        report["lenient_accuracy_vs_k"] = curves.accuracy_vs_k;
        report["accuracy_vs_attempts"] = curves.accuracy_vs_attempts;
        std::ofstream(out_dir / "report.json") << report.dump(1) << "\n";

        PlotSeries k_series{"acc vs k", {}, {}};
        for (size_t i = 0; i < curves.ks.size(); ++i) {
            k_series.xs.push_back(curves.ks[i]);
            k_series.ys.push_back(curves.accuracy_vs_k[i]);
        }
        write_png((out_dir / "lenient_k.png").string(), render_line_chart({k_series}));
        PlotSeries a_series{"acc vs attempts", {}, {}};
        for (size_t i = 0; i < curves.accuracy_vs_attempts.size(); ++i) {
            a_series.xs.push_back(static_cast<double>(i + 1));
            a_series.ys.push_back(curves.accuracy_vs_attempts[i]);
        }
        write_png((out_dir / "lenient_attempts.png").string(), render_line_chart({a_series}));
        std::cout << "report: " << (out_dir / "report.json").string() << "\n";
        return 0;
    }

    if (predictions.empty()) throw ValidationError("eval: need --predictions with --metric");
    fs::path pred_dir = predictions;
    auto pred_path = [&](size_t i) {
        return pred_dir / ("pred_test_" + std::to_string(i) + ".png");
    };

    std::vector<double> scores;
    json per_sample = json::array();
    std::vector<std::vector<std::string>> csv_rows;

    if (metric == "miou") {
        if (task.test_truth.masks.size() != task.test.size())
            throw ValidationError("eval: task has no segmentation ground truth");
        for (size_t i = 0; i < task.test.size(); ++i) {
            Image pred = read_png(pred_path(i).string());
            double s = miou(pred, task.test_truth.masks[i]);
            scores.push_back(s);
            per_sample.push_back(s);
            csv_rows.push_back({std::to_string(i), std::to_string(s)});
        }
    } else if (metric == "match-rate") {
        if (task.test_truth.poses.size() != task.test.size())
            throw ValidationError("eval: task has no pose ground truth");
        for (size_t i = 0; i < task.test.size(); ++i) {
            Image pred = read_png(pred_path(i).string());
            auto r = match_rate(pred, task.test_truth.poses[i]);
            if (!r.defined) {
                per_sample.push_back(nullptr);
                csv_rows.push_back({std::to_string(i), "undefined"});
                continue;
            }
            scores.push_back(r.rate);
            per_sample.push_back(r.rate);
            csv_rows.push_back({std::to_string(i), std::to_string(r.rate)});
        }
    } else if (metric == "accuracy") {
        if (task.test_truth.labels.size() != task.test.size())
            throw ValidationError("eval: task has no classification ground truth");
        auto symbols = default_symbols();
        std::vector<int> pred_labels, true_labels;
        for (size_t i = 0; i < task.test.size(); ++i) {
            Image pred = read_png(pred_path(i).string());
            auto decoded = decode_classification_grid(pred, symbols);
            for (int k = 0; k < 16; ++k) {
                pred_labels.push_back(decoded[static_cast<size_t>(k)]);
                true_labels.push_back(task.test_truth.labels[i][static_cast<size_t>(k)]);
            }
        }
        auto rep = classification_report(pred_labels, true_labels, static_cast<int>(symbols.size()));
        json report{{"metric", "accuracy"},
                    {"aggregate", rep.accuracy},
                    {"n", rep.n},
                    {"confusion_counts", rep.counts},
                    {"confusion_row_normalized", rep.row_normalized}};
        std::ofstream(out_dir / "report.json") << report.dump(1) << "\n";
        write_csv(out_dir / "report.csv", {"class", "row"}, {});
        write_png((out_dir / "confusion.png").string(), render_heatmap(rep.row_normalized));
        std::cout << "accuracy " << rep.accuracy << "\n";
        return 0;
    } else {
        throw ValidationError("eval: unknown metric '" + metric + "'");
    }

    double mean = 0;
    for (double s : scores) mean += s;
    if (!scores.empty()) mean /= static_cast<double>(scores.size());
    json report{{"metric", metric},
                {"aggregate", mean},
                {"defined_samples", scores.size()},
                {"per_sample", per_sample}};
    std::ofstream(out_dir / "report.json") << report.dump(1) << "\n";
    write_csv(out_dir / "report.csv", {"sample", metric}, csv_rows);
    std::cout << metric << " mean " << mean << " over " << scores.size() << " samples\n";
    return 0;
}

int cmd_sweep(const std::string& axis, const std::string& base_path, const std::string& task_kind,
              const std::string& n_grid_csv, int n_test, int steps, int runs, int jobs,
              const std::string& config_path, const std::string& out) {
    Checkpoint base = load_checkpoint(base_path);
    ExperimentConfig cfg = config_from_flag(config_path);
    cfg.model = base.config;
    auto kind = task_kind_from_name(task_kind);
    if (!kind || (*kind != TaskKind::Segmentation && *kind != TaskKind::Pose))
        throw ValidationError("sweep: --task-kind must be segmentation or pose");

    std::vector<int> n_grid;
    {
        std::stringstream ss(n_grid_csv);
        std::string item;
        while (std::getline(ss, item, ',')) n_grid.push_back(std::stoi(item));
        if (n_grid.empty()) throw ValidationError("sweep: empty --n-grid");
    }

    struct Row {
        std::string label;
        ExperimentConfig cfg;
    };
    std::vector<Row> rows;
    if (axis == "interp") {
        for (InterpVariant v : {InterpVariant::Linear, InterpVariant::Quadratic, InterpVariant::Discrete,
                                InterpVariant::Tiles}) {
            Row r{interp_variant_name(v), cfg};
            r.cfg.interp.variant = v;
            rows.push_back(r);
        }
    } else if (axis == "targets") {
        for (TargetSpec t : {TargetSpec::QK, TargetSpec::VO, TargetSpec::QKVO, TargetSpec::AllLinear}) {
            Row r{target_spec_name(t), cfg};
            r.cfg.lora.targets = t;
            rows.push_back(r);
        }
    } else if (axis == "rank") {
        for (int rank : {4, 8, 16, 32}) {
            Row r{"rank " + std::to_string(rank), cfg};
            r.cfg.lora.rank = rank;
            rows.push_back(r);
        }
    } else if (axis == "n") {
        rows.push_back({"default", cfg});
    } else {
        throw ValidationError("sweep: unknown axis '" + axis + "' (interp|targets|rank|n)");
    }

    // clamp ranks against the model
    for (auto& r : rows) r.cfg.lora.rank = clamp_rank_with_warning(r.cfg, r.cfg.lora.targets, r.cfg.lora.rank);

    // cells: rows x n-grid x runs
    struct Cell {
        size_t row;
        size_t col;
        int run_idx;
        double score = 0;
    };
    std::vector<Cell> cells;
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < n_grid.size(); ++j)
            for (int k = 0; k < runs; ++k) cells.push_back({i, j, k, 0.0});

    NoiseSchedule sched = base.schedule();
    int infer_steps = cfg.infer_steps > 0 ? cfg.infer_steps : 40;
    std::atomic<size_t> next{0};
    std::mutex io_mu;

    auto worker = [&]() {
        while (true) {
            size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            Cell& cell = cells[idx];
            const Row& row = rows[cell.row];
            int n = n_grid[cell.col];

            // the task set is shared across rows (same seed per column)
            TaskSet task = generate_synthetic_tasks(*kind, n, n_test,
                                                    derive_seed(cfg.data_seed, static_cast<uint64_t>(n)),
                                                    cfg.model.height, cfg.model.width);
            TrainRunConfig run = row.cfg.run();
            run.steps = steps > 0 ? steps : default_finetune_steps(n);
            run.seed = derive_seed(cfg.seed, static_cast<uint64_t>(cell.run_idx), 0x57);

            LoraSpec spec = row.cfg.lora;
            spec.seed = run.seed;
            Checkpoint adapter = finetune_lora(base, task, cfg.model.frames, spec, run);

            double total = 0;
            int defined = 0;
            for (size_t t = 0; t < task.test.size(); ++t) {
                InferResult r = infer(base.base, &adapter.adapter, task.test[t].input, sched,
                                      derive_seed(run.seed, t, 0xe7a1), infer_steps);
                if (*kind == TaskKind::Segmentation) {
                    total += miou(r.prediction, task.test_truth.masks[t]);
                    ++defined;
                } else {
                    auto mr = match_rate(r.prediction, task.test_truth.poses[t]);
                    if (mr.defined) {
                        total += mr.rate;
                        ++defined;
                    }
                }
            }
            cell.score = defined > 0 ? total / defined : 0.0;
            std::lock_guard<std::mutex> lk(io_mu);
            std::cout << "cell " << row.label << " n=" << n << " run " << cell.run_idx << " -> "
                      << cell.score << "\n";
        }
    };

    std::vector<std::thread> pool;
    int n_workers = std::max(1, jobs);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // aggregate over runs
    std::vector<std::vector<double>> table(rows.size(), std::vector<double>(n_grid.size(), 0.0));
    for (const auto& cell : cells) table[cell.row][cell.col] += cell.score / runs;

    fs::path out_dir = resolve_out(out);
    fs::create_directories(out_dir);
    std::vector<std::string> header{axis};
    for (int n : n_grid) header.push_back("n=" + std::to_string(n));
    std::vector<std::vector<std::string>> csv_rows;
    json jrows = json::array();
    for (size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> r{rows[i].label};
        json jr{{"label", rows[i].label}};
        for (size_t j = 0; j < n_grid.size(); ++j) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", table[i][j]);
            r.push_back(buf);
            jr["n=" + std::to_string(n_grid[j])] = table[i][j];
        }
        csv_rows.push_back(r);
        jrows.push_back(jr);
    }
    write_csv(out_dir / "table.csv", header, csv_rows);
    json jt{{"axis", axis},
            {"metric", *kind == TaskKind::Segmentation ? "miou" : "match_rate"},
            {"task_kind", task_kind},
            {"runs", runs},
            {"rows", jrows}};
    std::ofstream(out_dir / "table.json") << jt.dump(1) << "\n";
    write_run_meta(out_dir, "sweep", cfg, {{"axis", axis}});

    // table on stdout
    for (const auto& h : header) std::cout << h << "\t";
    std::cout << "\n";
    for (const auto& r : csv_rows) {
        for (const auto& v : r) std::cout << v << "\t";
        std::cout << "\n";
    }
    return 0;
}

int cmd_param_count(const std::string& config_path) {
    ExperimentConfig cfg = config_from_flag(config_path);
    auto params = init_params<float>(cfg.model, 0);
    std::cout << "closed-form parameter count: " << cfg.model.param_count() << "\n";
    std::cout << "materialized tensor total:   " << params.total_numel() << "\n";
    for (const auto& [name, t] : params.tensors) {
        std::cout << "  " << name << " [";
        for (size_t i = 0; i < t.shape.size(); ++i) std::cout << (i ? "x" : "") << t.shape[i];
        std::cout << "] = " << t.numel() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"few-shot visual tasks via transition-video diffusion"};
    app.require_subcommand(1);

    // make-dataset
    auto* mk = app.add_subcommand("make-dataset", "generate or import a task directory");
    std::string mk_kind = "segmentation", mk_out, mk_arc_json;
    int mk_n = 5, mk_n_test = 8, mk_h = 32, mk_w = 32;
    uint64_t mk_seed = 42;
    mk->add_option("--kind", mk_kind, "task kind");
    mk->add_option("--n", mk_n, "training pairs");
    mk->add_option("--n-test", mk_n_test, "test pairs");
    mk->add_option("--seed", mk_seed, "generator seed");
    mk->add_option("--height", mk_h, "canvas height");
    mk->add_option("--width", mk_w, "canvas width");
    mk->add_option("--arc-json", mk_arc_json, "import a task in the public ARC JSON schema");
    mk->add_option("--out", mk_out, "output directory")->required();

    // make-videos
    auto* mv = app.add_subcommand("make-videos", "write transition videos for a task directory");
    std::string mv_task, mv_method = "linear", mv_out;
    int mv_frames = 9;
    mv->add_option("--task-dir", mv_task)->required();
    mv->add_option("--frames", mv_frames);
    mv->add_option("--interp", mv_method);
    mv->add_option("--out", mv_out)->required();

    // pretrain
    auto* pt = app.add_subcommand("pretrain", "pretrain the base model on the moving-shapes corpus");
    std::string pt_config, pt_out, pt_log, pt_resume;
    int pt_steps = 0;
    pt->add_option("--config", pt_config, "experiment config (TOML)");
    pt->add_option("--steps", pt_steps, "override training steps");
    pt->add_option("--log", pt_log, "JSON-lines training log");
    pt->add_option("--resume", pt_resume, "resume from a base checkpoint");
    pt->add_option("--out", pt_out)->required();

    // finetune
    auto* ft = app.add_subcommand("finetune", "fit LoRA adapters to a task");
    std::string ft_base, ft_task, ft_config, ft_interp, ft_targets, ft_out, ft_log;
    int ft_rank = 0, ft_steps = 0, ft_eval_every = 0;
    uint64_t ft_seed = 0;
    ft->add_option("--base", ft_base)->required();
    ft->add_option("--task-dir", ft_task)->required();
    ft->add_option("--config", ft_config);
    ft->add_option("--interp", ft_interp, "linear|quadratic|discrete|tiles");
    ft->add_option("--lora-targets", ft_targets, "qk|vo|qkvo|all-linear");
    ft->add_option("--rank", ft_rank);
    ft->add_option("--steps", ft_steps);
    ft->add_option("--seed", ft_seed);
    ft->add_option("--eval-every", ft_eval_every, "snapshot cadence (arc tasks)");
    ft->add_option("--log", ft_log);
    ft->add_option("--out", ft_out)->required();

    // infer
    auto* in = app.add_subcommand("infer", "generate a prediction for one input image");
    std::string in_base, in_adapter, in_input, in_out;
    uint64_t in_seed = 0;
    int in_steps = 0;
    in->add_option("--base", in_base)->required();
    in->add_option("--adapter", in_adapter);
    in->add_option("--input", in_input)->required();
    in->add_option("--seed", in_seed);
    in->add_option("--steps", in_steps, "sampling steps (0 = full chain)");
    in->add_option("--out", in_out)->required();

    // eval
    auto* ev = app.add_subcommand("eval", "score predictions or protocol runs");
    std::string ev_task, ev_pred, ev_metric, ev_run, ev_protocol, ev_out;
    int ev_attempts = 0;
    ev->add_option("--task-dir", ev_task)->required();
    ev->add_option("--predictions", ev_pred, "directory with pred_test_<i>.png");
    ev->add_option("--metric", ev_metric, "miou|match-rate|accuracy");
    ev->add_option("--run-dir", ev_run, "finetune output directory with snapshots");
    ev->add_option("--protocol", ev_protocol, "arc|conceptarc");
    ev->add_option("--attempts", ev_attempts);
    ev->add_option("--out", ev_out)->required();

    // sweep
    auto* sw = app.add_subcommand("sweep", "ablation table over one axis");
    std::string sw_axis, sw_base, sw_kind = "segmentation", sw_grid = "3,5,10,30", sw_config, sw_out;
    int sw_steps = 0, sw_runs = 1, sw_jobs = 1, sw_n_test = 8;
    sw->add_option("--axis", sw_axis, "interp|targets|rank|n")->required();
    sw->add_option("--base", sw_base)->required();
    sw->add_option("--task-kind", sw_kind);
    sw->add_option("--n-grid", sw_grid);
    sw->add_option("--n-test", sw_n_test);
    sw->add_option("--steps", sw_steps);
    sw->add_option("--runs", sw_runs);
    sw->add_option("--jobs", sw_jobs);
    sw->add_option("--config", sw_config);
    sw->add_option("--out", sw_out)->required();

    // param-count
    auto* pc = app.add_subcommand("param-count", "parameter accounting for a model config");
    std::string pc_config;
    pc->add_option("--config", pc_config);

    // emit-config
    auto* ec = app.add_subcommand("emit-config", "write the default experiment config");
    std::string ec_out;
    ec->add_option("--out", ec_out)->required();

    try {
        app.parse(argc, argv);
        if (mk->parsed())
            return cmd_make_dataset(mk_kind, mk_n, mk_n_test, mk_seed, mk_h, mk_w, mk_arc_json, mk_out);
        if (mv->parsed()) return cmd_make_videos(mv_task, mv_frames, mv_method, mv_out);
        if (pt->parsed()) return cmd_pretrain(pt_config, pt_steps, pt_out, pt_log, pt_resume);
        if (ft->parsed())
            return cmd_finetune(ft_base, ft_task, ft_config, ft_interp, ft_targets, ft_rank, ft_steps,
                                ft_seed, ft_eval_every, ft_out, ft_log);
        if (in->parsed()) return cmd_infer(in_base, in_adapter, in_input, in_seed, in_steps, in_out);
        if (ev->parsed())
            return cmd_eval(ev_task, ev_pred, ev_metric, ev_run, ev_protocol, ev_attempts, ev_out);
        if (sw->parsed())
            return cmd_sweep(sw_axis, sw_base, sw_kind, sw_grid, sw_n_test, sw_steps, sw_runs, sw_jobs,
                             sw_config, sw_out);
        if (pc->parsed()) return cmd_param_count(pc_config);
        if (ec->parsed()) {
            save_experiment_config(resolve_out(ec_out), default_experiment_config());
            std::cout << "wrote " << resolve_out(ec_out) << "\n";
            return 0;
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}} << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}} << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << json{{"error", {{"type", "numeric"}, {"message", e.what()}}}} << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << json{{"error", {{"type", "io"}, {"message", e.what()}}}} << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}} << "\n";
        return 1;
    }
}
