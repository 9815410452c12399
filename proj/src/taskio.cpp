#include "taskvid/taskio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "taskvid/errors.hpp"
#include "taskvid/png_io.hpp"

namespace taskvid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json grid_to_json(const Grid& g) {
    json rows = json::array();
    for (int r = 0; r < g.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < g.cols; ++c) row.push_back(g.at(r, c));
        rows.push_back(row);
    }
    return rows;
}

Grid grid_from_json(const json& j) {
    int rows = static_cast<int>(j.size());
    if (rows < 1 || rows > 30) throw ValidationError("grid_from_json: row count outside [1,30]");
    int cols = static_cast<int>(j.at(0).size());
    if (cols < 1 || cols > 30) throw ValidationError("grid_from_json: column count outside [1,30]");
    Grid g(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<size_t>(r));
        if (static_cast<int>(row.size()) != cols) throw ValidationError("grid_from_json: ragged grid");
        for (int c = 0; c < cols; ++c) {
            int v = row.at(static_cast<size_t>(c));
            if (v < 0 || v > 9) throw ValidationError("grid_from_json: cell value outside 0..9");
            g.at(r, c) = v;
        }
    }
    return g;
}

json pose_to_json(const PoseAnnotation& a) {
    json j;
    for (int p = 0; p < kPoseParts; ++p) {
        json pts = json::array();
        for (const auto& [x, y] : a.centroids[static_cast<size_t>(p)]) pts.push_back({x, y});
        j[pose_part_name(static_cast<PosePart>(p))] = pts;
    }
    j["inter_head_distance"] = a.inter_head_distance;
    return j;
}

PoseAnnotation pose_from_json(const json& j) {
    PoseAnnotation a;
    for (int p = 0; p < kPoseParts; ++p) {
        for (const auto& pt : j.at(pose_part_name(static_cast<PosePart>(p))))
            a.centroids[static_cast<size_t>(p)].emplace_back(pt.at(0).get<float>(), pt.at(1).get<float>());
    }
    a.inter_head_distance = j.at("inter_head_distance");
    return a;
}

json mask_to_json(const Mask& m) {
    // run-length over the flat array keeps task.json readable
    json runs = json::array();
    size_t i = 0;
    while (i < m.m.size()) {
        size_t j = i;
        while (j < m.m.size() && m.m[j] == m.m[i]) ++j;
        runs.push_back({static_cast<int>(m.m[i]), j - i});
        i = j;
    }
    return json{{"h", m.h}, {"w", m.w}, {"runs", runs}};
}

Mask mask_from_json(const json& j) {
    Mask m(j.at("h"), j.at("w"));
    size_t i = 0;
    for (const auto& run : j.at("runs")) {
        uint8_t v = static_cast<uint8_t>(run.at(0).get<int>());
        size_t n = run.at(1);
        for (size_t k = 0; k < n && i < m.m.size(); ++k) m.m[i++] = v;
    }
    if (i != m.m.size()) throw ValidationError("mask_from_json: run lengths do not cover the mask");
    return m;
}

void write_pairs(const fs::path& dir, const std::string& split, const std::vector<TaskPair>& pairs,
                 json& out) {
    out = json::array();
    char buf[64];
    for (size_t i = 0; i < pairs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%s_%03zu_in.png", split.c_str(), i);
        std::string in_name = buf;
        std::snprintf(buf, sizeof buf, "%s_%03zu_tgt.png", split.c_str(), i);
        std::string tgt_name = buf;
        write_png((dir / in_name).string(), pairs[i].input);
        write_png((dir / tgt_name).string(), pairs[i].target);
        out.push_back({{"input", in_name}, {"target", tgt_name}});
    }
}

json truth_to_json(const TaskTruth& t) {
    json j;
    if (!t.masks.empty()) {
        j["masks"] = json::array();
        for (const auto& m : t.masks) j["masks"].push_back(mask_to_json(m));
    }
    if (!t.poses.empty()) {
        j["poses"] = json::array();
        for (const auto& p : t.poses) j["poses"].push_back(pose_to_json(p));
    }
    if (!t.in_grids.empty()) {
        j["in_grids"] = json::array();
        j["out_grids"] = json::array();
        for (const auto& g : t.in_grids) j["in_grids"].push_back(grid_to_json(g));
        for (const auto& g : t.out_grids) j["out_grids"].push_back(grid_to_json(g));
    }
    if (!t.labels.empty()) {
        j["labels"] = json::array();
        for (const auto& l : t.labels) j["labels"].push_back(l);
    }
    return j;
}

TaskTruth truth_from_json(const json& j) {
    TaskTruth t;
    if (j.contains("masks"))
        for (const auto& m : j.at("masks")) t.masks.push_back(mask_from_json(m));
    if (j.contains("poses"))
        for (const auto& p : j.at("poses")) t.poses.push_back(pose_from_json(p));
    if (j.contains("in_grids")) {
        for (const auto& g : j.at("in_grids")) t.in_grids.push_back(grid_from_json(g));
        for (const auto& g : j.at("out_grids")) t.out_grids.push_back(grid_from_json(g));
    }
    if (j.contains("labels"))
        for (const auto& l : j.at("labels")) t.labels.push_back(l.get<std::array<int, 16>>());
    return t;
}

}  // namespace

void save_taskset(const std::string& dir, const TaskSet& task) {
    fs::create_directories(dir);
    json j;
    j["name"] = task.name;
    j["kind"] = task_kind_name(task.kind);
    j["height"] = task.height;
    j["width"] = task.width;
    write_pairs(dir, "train", task.train, j["train"]);
    write_pairs(dir, "test", task.test, j["test"]);
    j["train_truth"] = truth_to_json(task.train_truth);
    j["test_truth"] = truth_to_json(task.test_truth);

    std::ofstream out(fs::path(dir) / "task.json");
    if (!out) throw IoError("save_taskset: cannot write task.json under " + dir);
    out << j.dump(1) << "\n";
}

TaskSet load_taskset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "task.json");
    if (!in) throw IoError("load_taskset: cannot open " + dir + "/task.json");
    json j;
    in >> j;

    TaskSet t;
    t.name = j.at("name");
    auto kind = task_kind_from_name(j.at("kind"));
    if (!kind) throw ValidationError("load_taskset: unknown task kind " + j.at("kind").get<std::string>());
    t.kind = *kind;
    t.height = j.at("height");
    t.width = j.at("width");
    auto read_pairs = [&](const json& arr, std::vector<TaskPair>& pairs) {
        for (const auto& e : arr) {
            TaskPair p;
            p.input = read_png((fs::path(dir) / e.at("input").get<std::string>()).string());
            p.target = read_png((fs::path(dir) / e.at("target").get<std::string>()).string());
            pairs.push_back(std::move(p));
        }
    };
    read_pairs(j.at("train"), t.train);
    read_pairs(j.at("test"), t.test);
    t.train_truth = truth_from_json(j.at("train_truth"));
    t.test_truth = truth_from_json(j.at("test_truth"));
    return t;
}

TaskSet load_arc_json(const std::string& path, int height, int width, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw IoError("load_arc_json: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("load_arc_json: " + path + " is not valid JSON: " + e.what());
    }

    TaskSet t;
    t.kind = TaskKind::Arc;
    t.height = height;
    t.width = width;
    t.name = name.empty() ? fs::path(path).stem().string() : name;

    auto read_split = [&](const char* key, std::vector<TaskPair>& pairs, TaskTruth& truth) {
        if (!j.contains(key)) return;
        for (const auto& e : j.at(key)) {
            Grid in_g = grid_from_json(e.at("input"));
            Grid out_g = e.contains("output") ? grid_from_json(e.at("output")) : in_g;
            pairs.push_back({grid_encode(in_g, height, width), grid_encode(out_g, height, width)});
            truth.in_grids.push_back(in_g);
            truth.out_grids.push_back(out_g);
        }
    };
    read_split("train", t.train, t.train_truth);
    read_split("test", t.test, t.test_truth);
    if (t.train.empty()) throw ValidationError("load_arc_json: task has no training pairs");
    return t;
}

void save_arc_json(const std::string& path, const TaskSet& task) {
    if (task.kind != TaskKind::Arc) throw ValidationError("save_arc_json: not an arc task");
    json j;
    auto write_split = [&](const char* key, const TaskTruth& truth) {
        json arr = json::array();
        for (size_t i = 0; i < truth.in_grids.size(); ++i)
            arr.push_back({{"input", grid_to_json(truth.in_grids[i])},
                           {"output", grid_to_json(truth.out_grids[i])}});
        j[key] = arr;
    };
    write_split("train", task.train_truth);
    write_split("test", task.test_truth);
    std::ofstream out(path);
    if (!out) throw IoError("save_arc_json: cannot open " + path);
    out << j.dump(1) << "\n";
}

}  // namespace taskvid
