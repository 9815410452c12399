#include "taskvid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "taskvid/assignment.hpp"
#include "taskvid/errors.hpp"

namespace taskvid {

double miou(const Image& pred, const Mask& truth) {
    if (pred.h != truth.h || pred.w != truth.w) throw ValidationError("miou: shape mismatch");
    Mask p = mask_decode(pred);
    int64_t inter_fg = 0, union_fg = 0, inter_bg = 0, union_bg = 0;
    for (size_t i = 0; i < p.m.size(); ++i) {
        bool a = p.m[i] != 0, b = truth.m[i] != 0;
        inter_fg += (a && b);
        union_fg += (a || b);
        inter_bg += (!a && !b);
        union_bg += (!a || !b);
    }
    double iou_fg = union_fg == 0 ? 1.0 : static_cast<double>(inter_fg) / union_fg;
    double iou_bg = union_bg == 0 ? 1.0 : static_cast<double>(inter_bg) / union_bg;
    return 0.5 * (iou_fg + iou_bg);
}

// ---------------------------------------------------------------------------
// Components and match rate
// ---------------------------------------------------------------------------

std::vector<std::pair<float, float>> component_centroids(const Mask& mask) {
    std::vector<int> label(mask.m.size(), -1);
    std::vector<std::pair<float, float>> centroids;
    std::deque<std::pair<int, int>> queue;
    int next = 0;
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (!mask.at(y, x) || label[static_cast<size_t>(y) * mask.w + x] >= 0) continue;
            // BFS, 8-connectivity
            int id = next++;
            double sx = 0, sy = 0;
            int64_t n = 0;
            queue.push_back({y, x});
            label[static_cast<size_t>(y) * mask.w + x] = id;
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                sx += cx;
                sy += cy;
                ++n;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
                        size_t idx = static_cast<size_t>(ny) * mask.w + nx;
                        if (mask.m[idx] && label[idx] < 0) {
                            label[idx] = id;
                            queue.push_back({ny, nx});
                        }
                    }
            }
            centroids.emplace_back(static_cast<float>(sx / n), static_cast<float>(sy / n));
        }
    return centroids;
}

Mask pose_part_mask(const Image& img, PosePart part, const MatchRateConfig& cfg) {
    Mask m(img.h, img.w);
    const float margin = static_cast<float>(cfg.dominance_margin);
    const float floor = static_cast<float>(cfg.head_floor);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
            bool on = false;
            switch (part) {
                case PosePart::Head: on = r > floor && g > floor && b > floor; break;
                case PosePart::Torso: on = b > r + margin && b > g + margin; break;
                case PosePart::Arms: on = r > g + margin && r > b + margin; break;
                case PosePart::Legs: on = g > r + margin && g > b + margin; break;
            }
            m.at(y, x) = on ? 1 : 0;
        }
    return m;
}

MatchRateResult match_rate(const Image& pred, const PoseAnnotation& annotation,
                           const MatchRateConfig& cfg) {
    MatchRateResult res;
    res.total = static_cast<int>(annotation.total());
    if (res.total == 0) return res;  // undefined, excluded from aggregates
    res.defined = true;

    double inter_head =
        annotation.inter_head_distance > 0 ? annotation.inter_head_distance : cfg.default_inter_head;
    double threshold = cfg.distance_multiple * inter_head;

    for (int part = 0; part < kPoseParts; ++part) {
        const auto& annotated = annotation.centroids[static_cast<size_t>(part)];
        if (annotated.empty()) continue;
        auto predicted = component_centroids(pose_part_mask(pred, static_cast<PosePart>(part), cfg));
        if (predicted.empty()) continue;

        std::vector<std::vector<double>> cost(predicted.size(), std::vector<double>(annotated.size()));
        for (size_t i = 0; i < predicted.size(); ++i)
            for (size_t j = 0; j < annotated.size(); ++j)
                cost[i][j] = std::hypot(predicted[i].first - annotated[j].first,
                                        predicted[i].second - annotated[j].second);
        std::vector<int> match = solve_assignment(cost);
        for (size_t i = 0; i < match.size(); ++i)
            if (match[i] >= 0 && cost[i][static_cast<size_t>(match[i])] < threshold) ++res.matched;
    }
    res.rate = static_cast<double>(res.matched) / res.total;
    return res;
}

// ---------------------------------------------------------------------------
// ARC protocols
// ---------------------------------------------------------------------------

ArcAttemptOutcome compare_grids(const Grid& pred, const Grid& truth) {
    ArcAttemptOutcome o;
    int d = pred.diff_count(truth);
    if (d < 0) return o;  // shape mismatch
    o.shape_ok = true;
    o.diff_cells = d;
    return o;
}

namespace {

bool input_solved(const ArcInputResult& input, int attempts, int lenient_k) {
    int n = std::min<int>(attempts, static_cast<int>(input.attempts.size()));
    for (int i = 0; i < n; ++i) {
        const auto& a = input.attempts[static_cast<size_t>(i)];
        if (a.shape_ok && a.diff_cells <= lenient_k) return true;
    }
    return false;
}

}  // namespace

bool arc_task_solved(const ArcTaskResult& task, int attempts, int lenient_k) {
    if (task.inputs.empty()) return false;
    for (const auto& input : task.inputs)
        if (!input_solved(input, attempts, lenient_k)) return false;
    return true;
}

std::vector<bool> conceptarc_input_solved(const ArcTaskResult& task, int attempts, int lenient_k) {
    std::vector<bool> out;
    out.reserve(task.inputs.size());
    for (const auto& input : task.inputs) out.push_back(input_solved(input, attempts, lenient_k));
    return out;
}

Grid conceptarc_black_remap(const Grid& pred, const std::vector<Grid>& train_outputs) {
    bool all_black = std::all_of(pred.cells.begin(), pred.cells.end(), [](int c) { return c == 0; });
    if (!all_black) return pred;
    for (const auto& g : train_outputs)
        for (int c : g.cells)
            if (c == 0) return pred;  // black is part of the puzzle, keep it
    Grid out = pred;
    for (auto& c : out.cells) c = 5;  // gray
    return out;
}

LenientCurves lenient_curves(const std::vector<ArcTaskResult>& results, int attempts, int max_k) {
    LenientCurves c;
    if (results.empty()) return c;
    const double n = static_cast<double>(results.size());

    for (int k = 0; k <= max_k; ++k) {
        int solved = 0;
        for (const auto& t : results) solved += arc_task_solved(t, attempts, k);
        c.ks.push_back(k);
        c.accuracy_vs_k.push_back(solved / n);
    }
    int max_attempts = attempts;
    for (const auto& t : results)
        for (const auto& in : t.inputs)
            max_attempts = std::max(max_attempts, static_cast<int>(in.attempts.size()));
    for (int a = 1; a <= max_attempts; ++a) {
        int solved = 0;
        for (const auto& t : results) solved += arc_task_solved(t, a, 0);
        c.accuracy_vs_attempts.push_back(solved / n);
    }
    // limiting case: any attempt with the right shape counts
    int shape_ok = 0;
    for (const auto& t : results) {
        bool all = !t.inputs.empty();
        for (const auto& in : t.inputs) {
            bool any = false;
            int lim = std::min<int>(attempts, static_cast<int>(in.attempts.size()));
            for (int i = 0; i < lim; ++i) any = any || in.attempts[static_cast<size_t>(i)].shape_ok;
            all = all && any;
        }
        shape_ok += all;
    }
    c.shape_ok_fraction = shape_ok / n;
    return c;
}

SnapshotChoice snapshot_selection(const std::vector<bool>& train_correct, int attempts) {
    if (train_correct.empty()) throw ValidationError("snapshot_selection: no snapshots recorded");
    if (attempts < 1) throw ValidationError("snapshot_selection: attempts must be >= 1");
    SnapshotChoice choice;
    int n = static_cast<int>(train_correct.size());

    int first = -1;
    for (int i = 0; i < n; ++i)
        if (train_correct[static_cast<size_t>(i)]) {
            first = i;
            break;
        }
    int start = first >= 0 ? first : std::max(0, n - attempts);
    choice.from_train_correct = first >= 0;
    for (int k = 0; k < attempts; ++k) {
        int idx = start + k;
        if (idx >= n) {
            idx = n - 1;
            choice.padded = true;
        }
        choice.indices.push_back(idx);
    }
    return choice;
}

ClassificationReport classification_report(const std::vector<int>& predicted,
                                           const std::vector<int>& truth, int n_classes) {
    if (predicted.size() != truth.size())
        throw ValidationError("classification_report: label list length mismatch");
    if (n_classes < 1) throw ValidationError("classification_report: need at least one class");
    ClassificationReport r;
    r.n = static_cast<int>(truth.size());
    r.counts.assign(static_cast<size_t>(n_classes), std::vector<int>(static_cast<size_t>(n_classes), 0));
    int correct = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = predicted[i];
        if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
            throw ValidationError("classification_report: label out of range");
        r.counts[static_cast<size_t>(t)][static_cast<size_t>(p)] += 1;
        correct += (t == p);
    }
    r.accuracy = r.n == 0 ? 0.0 : static_cast<double>(correct) / r.n;
    r.row_normalized.assign(static_cast<size_t>(n_classes),
                            std::vector<double>(static_cast<size_t>(n_classes), 0.0));
    for (int i = 0; i < n_classes; ++i) {
        int row_sum = 0;
        for (int j = 0; j < n_classes; ++j) row_sum += r.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
        if (row_sum > 0)
            for (int j = 0; j < n_classes; ++j)
                r.row_normalized[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                    static_cast<double>(r.counts[static_cast<size_t>(i)][static_cast<size_t>(j)]) / row_sum;
    }
    return r;
}

}  // namespace taskvid
