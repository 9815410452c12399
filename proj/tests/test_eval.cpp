#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taskvid/assignment.hpp"
#include "taskvid/errors.hpp"
#include "taskvid/eval.hpp"
#include "taskvid/rng.hpp"

using namespace taskvid;

namespace {

// factorial brute force over all assignments of the smaller side
double brute_force_min_cost(const std::vector<std::vector<double>>& cost) {
    size_t rows = cost.size(), cols = cost[0].size();
    bool transposed = rows > cols;
    std::vector<std::vector<double>> c = cost;
    if (transposed) {
        c.assign(cols, std::vector<double>(rows));
        for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < cols; ++j) c[j][i] = cost[i][j];
        std::swap(rows, cols);
    }
    std::vector<int> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double total = 0;
        for (size_t i = 0; i < rows; ++i) total += c[i][static_cast<size_t>(perm[i])];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double assignment_cost(const std::vector<std::vector<double>>& cost, const std::vector<int>& match) {
    double total = 0;
    for (size_t i = 0; i < match.size(); ++i)
        if (match[i] >= 0) total += cost[i][static_cast<size_t>(match[i])];
    return total;
}

ArcAttemptOutcome exact() { return {true, 0}; }
ArcAttemptOutcome off_by(int k) { return {true, k}; }
ArcAttemptOutcome bad_shape() { return {false, -1}; }

}  // namespace

TEST_CASE("miou") {
    SUBCASE("pred equals truth gives 1") {
        Mask truth(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 4; ++x) truth.at(y, x) = 1;
        CHECK(miou(render_mask_target(truth), truth) == doctest::Approx(1.0));
    }
    SUBCASE("pred equal to the complement gives 0 when both classes are non-empty") {
        Mask truth(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 4; ++x) truth.at(y, x) = 1;
        Mask flipped = truth;
        for (auto& v : flipped.m) v = v ? 0 : 1;
        CHECK(miou(render_mask_target(flipped), truth) == doctest::Approx(0.0));
    }
    SUBCASE("left-half truth vs left-3/4 prediction on 32x32 gives 7/12") {
        Mask truth(32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 16; ++x) truth.at(y, x) = 1;
        Mask pred(32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 24; ++x) pred.at(y, x) = 1;
        // fg: (16*32)/(24*32) = 2/3 ; bg: (8*32)/(16*32) = 1/2 ; mean = 7/12
        CHECK(miou(render_mask_target(pred), truth) == doctest::Approx(7.0 / 12.0));
    }
    SUBCASE("pixel-count recomputation agrees on 500 random masks") {
        RngStream rng(41);
        for (int trial = 0; trial < 500; ++trial) {
            Mask truth(8, 8), pred(8, 8);
            for (auto& v : truth.m) v = rng.bernoulli(0.4) ? 1 : 0;
            for (auto& v : pred.m) v = rng.bernoulli(0.4) ? 1 : 0;
            int64_t ifg = 0, ufg = 0, ibg = 0, ubg = 0;
            for (size_t i = 0; i < truth.m.size(); ++i) {
                ifg += (pred.m[i] && truth.m[i]);
                ufg += (pred.m[i] || truth.m[i]);
                ibg += (!pred.m[i] && !truth.m[i]);
                ubg += (!pred.m[i] || !truth.m[i]);
            }
            double fg = ufg == 0 ? 1.0 : double(ifg) / ufg;
            double bg = ubg == 0 ? 1.0 : double(ibg) / ubg;
            REQUIRE(miou(render_mask_target(pred), truth) == doctest::Approx(0.5 * (fg + bg)));
        }
    }
    SUBCASE("symmetric under swapping fg/bg of both pred and truth") {
        RngStream rng(43);
        for (int trial = 0; trial < 50; ++trial) {
            Mask truth(8, 8), pred(8, 8);
            for (auto& v : truth.m) v = rng.bernoulli(0.5) ? 1 : 0;
            for (auto& v : pred.m) v = rng.bernoulli(0.5) ? 1 : 0;
            Mask ntruth = truth, npred = pred;
            for (auto& v : ntruth.m) v = v ? 0 : 1;
            for (auto& v : npred.m) v = v ? 0 : 1;
            REQUIRE(miou(render_mask_target(pred), truth) ==
                    doctest::Approx(miou(render_mask_target(npred), ntruth)));
        }
    }
}

TEST_CASE("assignment equals factorial brute force on 500 random 3v3 instances") {
    RngStream rng(47);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::vector<double>> cost(3, std::vector<double>(3));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(0, 100);
        auto match = solve_assignment(cost);
        REQUIRE(assignment_cost(cost, match) == doctest::Approx(brute_force_min_cost(cost)));
    }
}

TEST_CASE("assignment equals brute force on rectangular instances up to 5 per side") {
    RngStream rng(53);
    for (int trial = 0; trial < 200; ++trial) {
        int rows = 1 + static_cast<int>(rng.randint(5));
        int cols = 1 + static_cast<int>(rng.randint(5));
        std::vector<std::vector<double>> cost(static_cast<size_t>(rows),
                                              std::vector<double>(static_cast<size_t>(cols)));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(0, 10);
        auto match = solve_assignment(cost);
        int assigned = 0;
        for (int m : match) assigned += (m >= 0);
        REQUIRE(assigned == std::min(rows, cols));
        REQUIRE(assignment_cost(cost, match) == doctest::Approx(brute_force_min_cost(cost)));
    }
}

TEST_CASE("match_rate") {
    SUBCASE("all components displaced beyond the threshold score 0") {
        PoseFigure f;
        f.strokes.push_back({PosePart::Head, {{8.0f, 8.0f}}, 2.0f});
        f.strokes.push_back({PosePart::Torso, {{8.0f, 12.0f}, {8.0f, 18.0f}}, 1.5f});
        PoseAnnotation ann;
        Image img = render_pose_target({f}, 32, 32, &ann);
        ann.inter_head_distance = 4.0f;  // threshold 6 px
        // displace annotations far away
        for (auto& part : ann.centroids)
            for (auto& [x, y] : part) {
                x += 20.0f;
                y += 10.0f;
            }
        auto r = match_rate(img, ann);
        CHECK(r.defined);
        CHECK(r.rate == doctest::Approx(0.0));
    }
    SUBCASE("empty annotation is undefined") {
        Image img(16, 16, -1.0f);
        auto r = match_rate(img, PoseAnnotation{});
        CHECK_FALSE(r.defined);
    }
    SUBCASE("default inter-head distance applies when none is annotated") {
        PoseFigure f;
        f.strokes.push_back({PosePart::Torso, {{8.0f, 4.0f}, {8.0f, 12.0f}}, 1.5f});
        PoseAnnotation ann;
        Image img = render_pose_target({f}, 32, 32, &ann);
        ann.inter_head_distance = 0.0f;  // unavailable -> 20 px default, x1.5
        // shift the annotation by 25 px: within 30 but beyond nothing
        ann.centroids[static_cast<size_t>(PosePart::Torso)][0].first += 25.0f;
        auto r = match_rate(img, ann);
        CHECK(r.rate == doctest::Approx(1.0));  // 25 < 1.5 * 20
        MatchRateConfig strict;
        strict.default_inter_head = 10.0;  // threshold 15 < 25
        auto r2 = match_rate(img, ann, strict);
        CHECK(r2.rate == doctest::Approx(0.0));
    }
}

TEST_CASE("protocol fixtures") {
    // 1. first attempt exact on all inputs -> solved
    ArcTaskResult t1{"t1", {{{exact(), off_by(3)}}, {{exact(), bad_shape()}}}};
    CHECK(arc_task_solved(t1, 2));

    // 2. both attempts wrong on one input, exact elsewhere -> not solved
    ArcTaskResult t2{"t2", {{{exact(), exact()}}, {{off_by(1), off_by(2)}}}};
    CHECK_FALSE(arc_task_solved(t2, 2));

    // 3. second attempt rescues a failed first attempt
    ArcTaskResult t3{"t3", {{{off_by(4), exact()}}}};
    CHECK(arc_task_solved(t3, 2));

    // 4. attempts beyond the budget do not count
    ArcTaskResult t4{"t4", {{{off_by(4), off_by(2), exact()}}}};
    CHECK_FALSE(arc_task_solved(t4, 2));
    CHECK(arc_task_solved(t4, 3));

    // 5. one-cell error: rejected strictly, accepted at k = 1
    ArcTaskResult t5{"t5", {{{off_by(1), off_by(5)}}}};
    CHECK_FALSE(arc_task_solved(t5, 2, 0));
    CHECK(arc_task_solved(t5, 2, 1));

    // 6. conceptarc: any of three attempts per input, reported per input
    ArcTaskResult t6{"t6", {{{off_by(2), off_by(1), exact()}}, {{off_by(1), off_by(1), off_by(1)}}}};
    auto flags = conceptarc_input_solved(t6, 3);
    REQUIRE(flags.size() == 2);
    CHECK(flags[0]);
    CHECK_FALSE(flags[1]);

    // 7. all-black prediction remaps to gray when black is absent from the
    // training outputs, and the remapped grid can match
    Grid black(2, 2, 0);
    Grid gray(2, 2, 5);
    std::vector<Grid> train_outputs{Grid(2, 2, 5), Grid(2, 2, 3)};
    CHECK(conceptarc_black_remap(black, train_outputs) == gray);

    // 8. the remap is suppressed when black is part of the puzzle
    std::vector<Grid> train_with_black{Grid(2, 2, 0)};
    CHECK(conceptarc_black_remap(black, train_with_black) == black);

    // 9. snapshot selection: train-correct at snapshot 3 of 6 -> attempts 3,4
    {
        auto c = snapshot_selection({false, false, true, false, true, false}, 2);
        CHECK(c.indices == std::vector<int>{2, 3});
        CHECK(c.from_train_correct);
        CHECK_FALSE(c.padded);
    }

    // 10. never train-correct -> the final attempts
    {
        auto c = snapshot_selection({false, false, false, false, false, false}, 2);
        CHECK(c.indices == std::vector<int>{4, 5});
        CHECK_FALSE(c.from_train_correct);
        CHECK_FALSE(c.padded);
    }

    // 11. single snapshot -> attempts repeat it and the padding is flagged
    {
        auto c = snapshot_selection({true}, 2);
        CHECK(c.indices == std::vector<int>{0, 0});
        CHECK(c.padded);
    }

    // 12. lenient curves: k = 0 equals strict accuracy, curves are monotone,
    // and the k -> infinity limit is the shape-correct fraction
    {
        std::vector<ArcTaskResult> results{t1, t2, t3, t5};
        auto curves = lenient_curves(results, 2, 6);
        int strict = 0;
        for (const auto& t : results) strict += arc_task_solved(t, 2, 0);
        CHECK(curves.accuracy_vs_k[0] == doctest::Approx(double(strict) / results.size()));
        for (size_t i = 1; i < curves.accuracy_vs_k.size(); ++i)
            REQUIRE(curves.accuracy_vs_k[i] >= curves.accuracy_vs_k[i - 1]);
        for (size_t i = 1; i < curves.accuracy_vs_attempts.size(); ++i)
            REQUIRE(curves.accuracy_vs_attempts[i] >= curves.accuracy_vs_attempts[i - 1]);
        CHECK(curves.accuracy_vs_k.back() <= curves.shape_ok_fraction + 1e-12);
    }
}

TEST_CASE("lenient curve monotonicity holds on random result sets") {
    RngStream rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ArcTaskResult> results;
        int n_tasks = 1 + static_cast<int>(rng.randint(6));
        for (int i = 0; i < n_tasks; ++i) {
            ArcTaskResult t;
            int n_inputs = 1 + static_cast<int>(rng.randint(3));
            for (int j = 0; j < n_inputs; ++j) {
                ArcInputResult in;
                for (int a = 0; a < 3; ++a) {
                    if (rng.bernoulli(0.15))
                        in.attempts.push_back(bad_shape());
                    else
                        in.attempts.push_back(off_by(static_cast<int>(rng.randint(4))));
                }
                t.inputs.push_back(in);
            }
            results.push_back(t);
        }
        auto curves = lenient_curves(results, 3, 5);
        for (size_t i = 1; i < curves.accuracy_vs_k.size(); ++i)
            REQUIRE(curves.accuracy_vs_k[i] >= curves.accuracy_vs_k[i - 1]);
        for (size_t i = 1; i < curves.accuracy_vs_attempts.size(); ++i)
            REQUIRE(curves.accuracy_vs_attempts[i] >= curves.accuracy_vs_attempts[i - 1]);
    }
}

TEST_CASE("compare_grids") {
    Grid a(2, 3, 1);
    Grid b = a;
    CHECK(compare_grids(a, b).exact());
    b.at(1, 2) = 4;
    auto o = compare_grids(b, a);
    CHECK(o.shape_ok);
    CHECK(o.diff_cells == 1);
    Grid c(3, 2, 1);
    CHECK_FALSE(compare_grids(c, a).shape_ok);
}

TEST_CASE("classification report") {
    SUBCASE("perfect labels give the identity confusion matrix") {
        std::vector<int> truth{0, 1, 2, 3, 2, 1};
        auto r = classification_report(truth, truth, 4);
        CHECK(r.accuracy == doctest::Approx(1.0));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (i == j)
                    CHECK(r.row_normalized[i][j] == doctest::Approx(1.0));
                else
                    CHECK(r.row_normalized[i][j] == doctest::Approx(0.0));
    }
    SUBCASE("all predictions class 0 give a single hot column") {
        std::vector<int> truth{0, 1, 2, 1, 2, 2};
        std::vector<int> pred(6, 0);
        auto r = classification_report(pred, truth, 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(r.row_normalized[i][0] == doctest::Approx(1.0));
            for (int j = 1; j < 3; ++j) CHECK(r.row_normalized[i][j] == doctest::Approx(0.0));
        }
        CHECK(r.accuracy == doctest::Approx(1.0 / 6.0));
    }
    SUBCASE("accuracy equals an independent recount on random labels") {
        RngStream rng(67);
        for (int trial = 0; trial < 100; ++trial) {
            int n = 1 + static_cast<int>(rng.randint(40));
            std::vector<int> truth, pred;
            for (int i = 0; i < n; ++i) {
                truth.push_back(static_cast<int>(rng.randint(5)));
                pred.push_back(static_cast<int>(rng.randint(5)));
            }
            auto r = classification_report(pred, truth, 5);
            int correct = 0;
            for (int i = 0; i < n; ++i) correct += (truth[static_cast<size_t>(i)] == pred[static_cast<size_t>(i)]);
            REQUIRE(r.accuracy == doctest::Approx(double(correct) / n));
            // trace of the unnormalized matrix over n
            int trace = 0;
            for (int k = 0; k < 5; ++k) trace += r.counts[static_cast<size_t>(k)][static_cast<size_t>(k)];
            REQUIRE(r.accuracy == doctest::Approx(double(trace) / n));
        }
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(classification_report({0, 1}, {0}, 2), ValidationError);
    }
}

TEST_CASE("component centroids handle diagonal connectivity") {
    // two pixels touching only diagonally form one 8-connected component
    Mask m(4, 4);
    m.at(0, 0) = 1;
    m.at(1, 1) = 1;
    auto c = component_centroids(m);
    REQUIRE(c.size() == 1);
    CHECK(c[0].first == doctest::Approx(0.5));
    CHECK(c[0].second == doctest::Approx(0.5));
    // separated pixels form two components
    Mask m2(4, 4);
    m2.at(0, 0) = 1;
    m2.at(0, 3) = 1;
    CHECK(component_centroids(m2).size() == 2);
}
