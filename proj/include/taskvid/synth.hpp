#pragma once

#include <cstdint>

#include "taskvid/codec.hpp"

namespace taskvid {

// Deterministic synthetic task families, one per TaskKind. All generators are
// pure functions of (arguments, seed).
TaskSet generate_synthetic_tasks(TaskKind kind, int n_train, int n_test, uint64_t seed,
                                 int height = 32, int width = 32);

// One clip of the pretraining corpus: colored shapes on a textured background
// that translate, scale and recolor across frames. Pure function of its
// arguments; a corpus is addressed as (corpus_seed, index).
Video synth_pretrain_video(int frames, int height, int width, uint64_t seed);

// Synthetic ARC rule families used by the arc generator (and by the
// acceptance smoke tasks, which pick these by name).
enum class ArcRule { Identity, RecolorAll, HorizontalFlip };
TaskSet generate_arc_rule_task(ArcRule rule, int n_train, int n_test, int grid_rows, int grid_cols,
                               uint64_t seed, int height, int width);

}  // namespace taskvid
