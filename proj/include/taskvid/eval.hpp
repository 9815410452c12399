#pragma once

#include <string>
#include <vector>

#include "taskvid/codec.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

// Mean IoU over {foreground, background} after binarizing the prediction at
// pixel mean > 0. A class empty in both prediction and truth scores 1.
double miou(const Image& pred, const Mask& truth);

// ---------------------------------------------------------------------------
// Pose match rate
// ---------------------------------------------------------------------------

struct MatchRateConfig {
    double distance_multiple = 1.5;
    double default_inter_head = 20.0;  // px, when the annotation carries none
    // color dominance margin for torso/arms/legs and the head whiteness floor
    double dominance_margin = 0.3;
    double head_floor = 0.5;
};

struct MatchRateResult {
    bool defined = false;  // false when the annotation is empty
    int matched = 0;
    int total = 0;
    double rate = 0.0;
};

// Per-part color segmentation, 8-connected components, centroids, exact
// minimum-distance assignment; a match counts when its distance is below
// distance_multiple * inter-head distance (default when unavailable).
MatchRateResult match_rate(const Image& pred, const PoseAnnotation& annotation,
                           const MatchRateConfig& cfg = {});

// 8-connected component centroids of a boolean mask (exposed for tests).
std::vector<std::pair<float, float>> component_centroids(const Mask& mask);

// part masks used by match_rate
Mask pose_part_mask(const Image& img, PosePart part, const MatchRateConfig& cfg = {});

// ---------------------------------------------------------------------------
// ARC / ConceptARC protocols
// ---------------------------------------------------------------------------

struct ArcAttemptOutcome {
    bool shape_ok = false;
    int diff_cells = -1;  // differing cells when shapes match
    bool exact() const { return shape_ok && diff_cells == 0; }
};

ArcAttemptOutcome compare_grids(const Grid& pred, const Grid& truth);

struct ArcInputResult {
    std::vector<ArcAttemptOutcome> attempts;  // ordered
};

struct ArcTaskResult {
    std::string name;
    std::vector<ArcInputResult> inputs;  // one per test input
};

// Strict rule: solved iff every test input has an exact attempt among its
// first `attempts`. `lenient_k` admits predictions with <= k wrong cells.
bool arc_task_solved(const ArcTaskResult& task, int attempts = 2, int lenient_k = 0);

// Per-test-input solved flags, any-of-first-`attempts` rule.
std::vector<bool> conceptarc_input_solved(const ArcTaskResult& task, int attempts = 3,
                                          int lenient_k = 0);

// All-black predictions are remapped to gray when black never appears in the
// training outputs (so the recolor cannot change the puzzle's logic).
Grid conceptarc_black_remap(const Grid& pred, const std::vector<Grid>& train_outputs);

struct LenientCurves {
    std::vector<int> ks;                    // 0..max_k
    std::vector<double> accuracy_vs_k;      // task-level accuracy at each k
    std::vector<double> accuracy_vs_attempts;  // 1..max attempts, strict matching
    double shape_ok_fraction = 0.0;         // k -> infinity limit
};

LenientCurves lenient_curves(const std::vector<ArcTaskResult>& results, int attempts, int max_k);

// ---------------------------------------------------------------------------
// Snapshot selection
// ---------------------------------------------------------------------------

struct SnapshotChoice {
    std::vector<int> indices;  // snapshot indices supplying the attempts
    bool padded = false;       // fewer snapshots than attempts
    bool from_train_correct = false;
};

// First snapshot whose training predictions were all correct supplies attempt
// one; subsequent snapshots supply the rest. Without any train-correct
// snapshot the final ones are used. Shortfalls repeat the last snapshot.
SnapshotChoice snapshot_selection(const std::vector<bool>& train_correct, int attempts);

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ClassificationReport {
    int n = 0;
    double accuracy = 0.0;
    std::vector<std::vector<int>> counts;          // rows = truth, cols = predicted
    std::vector<std::vector<double>> row_normalized;
};

ClassificationReport classification_report(const std::vector<int>& predicted,
                                           const std::vector<int>& truth, int n_classes);

}  // namespace taskvid
