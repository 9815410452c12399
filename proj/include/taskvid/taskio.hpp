#pragma once

#include <string>

#include "taskvid/codec.hpp"

namespace taskvid {

// Task directory layout: task.json (name, kind, canvas, pair file names and
// ground-truth annotations) plus 8-bit PNG images for every pair.
void save_taskset(const std::string& dir, const TaskSet& task);
TaskSet load_taskset(const std::string& dir);

// Public ARC JSON schema: {"train": [{"input": [[int]], "output": [[int]]}],
// "test": [...]}. Grids are rendered onto the given canvas.
TaskSet load_arc_json(const std::string& path, int height, int width, const std::string& name = "");

// Serialize a task back out in the same schema (grids only; arc tasks only).
void save_arc_json(const std::string& path, const TaskSet& task);

}  // namespace taskvid
