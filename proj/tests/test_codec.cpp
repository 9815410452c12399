#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "taskvid/codec.hpp"
#include "taskvid/errors.hpp"
#include "taskvid/eval.hpp"
#include "taskvid/png_io.hpp"
#include "taskvid/rng.hpp"
#include "taskvid/synth.hpp"

using namespace taskvid;

namespace {

Grid random_grid(RngStream& rng, int max_side = 30) {
    int r = 1 + static_cast<int>(rng.randint(max_side));
    int c = 1 + static_cast<int>(rng.randint(max_side));
    Grid g(r, c);
    for (auto& v : g.cells) v = static_cast<int>(rng.randint(10));
    return g;
}

int canvas_for(const Grid& g) {
    // smallest square canvas with >= 4 px cells and 1 px borders
    int side = std::max(g.rows, g.cols);
    return side * 4 + side + 1;
}

}  // namespace

TEST_CASE("1x1 grid renders a single centered black block") {
    Grid g(1, 1, 0);
    Image img = grid_encode(g, 32, 32);
    Palette p = Palette::default_palette();
    GridLayout l = grid_layout(1, 1, 32, 32);
    CHECK(l.cell >= 4);
    // cell pixels carry palette[0], everything else the border color
    int block = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            bool in_cell = y >= l.oy + 1 && y < l.oy + 1 + l.cell && x >= l.ox + 1 && x < l.ox + 1 + l.cell;
            if (in_cell) {
                CHECK(img.at(y, x, 0) == doctest::Approx(p.colors[0].fr()));
                ++block;
            } else {
                CHECK(img.at(y, x, 0) == doctest::Approx(p.border.fr()));
            }
        }
    CHECK(block == l.cell * l.cell);
}

TEST_CASE("2x2 grid paints four equal blocks with exact palette means") {
    Grid g(2, 2);
    g.at(0, 0) = 1;
    g.at(0, 1) = 2;
    g.at(1, 0) = 3;
    g.at(1, 1) = 4;
    Image img = grid_encode(g, 32, 32);
    GridLayout l = grid_layout(2, 2, 32, 32);
    Palette p = Palette::default_palette();
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            double mr = 0, mg = 0, mb = 0;
            int y0 = l.oy + 1 + r * (l.cell + 1), x0 = l.ox + 1 + c * (l.cell + 1);
            for (int y = y0; y < y0 + l.cell; ++y)
                for (int x = x0; x < x0 + l.cell; ++x) {
                    mr += img.at(y, x, 0);
                    mg += img.at(y, x, 1);
                    mb += img.at(y, x, 2);
                }
            double n = l.cell * l.cell;
            const Rgb& col = p.colors[static_cast<size_t>(g.at(r, c))];
            CHECK(mr / n == doctest::Approx(col.fr()));
            CHECK(mg / n == doctest::Approx(col.fg()));
            CHECK(mb / n == doctest::Approx(col.fb()));
        }
}

TEST_CASE("grid encode/decode roundtrip is the identity on 1000 random grids") {
    RngStream rng(1234);
    for (int i = 0; i < 1000; ++i) {
        Grid g = random_grid(rng);
        int canvas = canvas_for(g);
        Image img = grid_encode(g, canvas, canvas);
        Grid back = grid_decode(img, g.rows, g.cols);
        REQUIRE(back == g);
    }
}

TEST_CASE("decoding tolerates additive noise below half the minimum palette distance") {
    Palette p = Palette::default_palette();
    // derived bound: uniform amplitude-0.1 noise shifts a cell mean by at most
    // 0.1 per channel, i.e. 0.1*sqrt(3) in L2; half the minimum inter-color
    // distance must exceed that for nearest-color decoding to be unaffected
    float min_dist = p.min_color_distance();
    CHECK(min_dist / 2.0f > 0.1f * std::sqrt(3.0f));

    RngStream rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Grid g = random_grid(rng, 10);
        int canvas = canvas_for(g);
        Image img = grid_encode(g, canvas, canvas);
        for (auto& v : img.px) v += static_cast<float>(rng.uniform(-0.1, 0.1));
        CHECK(grid_decode(img, g.rows, g.cols) == g);
    }
}

TEST_CASE("grid too large for the canvas is rejected with a size report") {
    Grid g(10, 10, 1);
    CHECK_THROWS_WITH_AS(grid_encode(g, 32, 32), doctest::Contains("10x10"), ValidationError);
}

TEST_CASE("palette json roundtrip") {
    auto dir = std::filesystem::temp_directory_path() / "taskvid_palette_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "palette.json").string();
    Palette p = Palette::default_palette();
    save_palette(path, p);
    Palette q = load_palette(path);
    for (int i = 0; i < 10; ++i) {
        CHECK(p.colors[i].r == q.colors[i].r);
        CHECK(p.colors[i].g == q.colors[i].g);
        CHECK(p.colors[i].b == q.colors[i].b);
    }
    CHECK(p.border.r == q.border.r);
}

TEST_CASE("mask render/decode roundtrip") {
    SUBCASE("all-false mask renders all black") {
        Mask m(8, 8, 0);
        Image img = render_mask_target(m);
        for (float v : img.px) CHECK(v == -1.0f);
    }
    SUBCASE("random masks roundtrip exactly over 100 trials") {
        RngStream rng(7);
        for (int trial = 0; trial < 100; ++trial) {
            Mask m(16, 16);
            for (auto& v : m.m) v = rng.bernoulli(0.5) ? 1 : 0;
            CHECK(mask_decode(render_mask_target(m)) == m);
        }
    }
}

TEST_CASE("pose rendering") {
    SUBCASE("no figures gives an all-black image") {
        Image img = render_pose_target({}, 32, 32);
        for (float v : img.px) CHECK(v == -1.0f);
    }
    SUBCASE("single head keypoint gives one white component") {
        PoseFigure f;
        f.strokes.push_back({PosePart::Head, {{16.0f, 16.0f}}, 3.0f});
        Image img = render_pose_target({f}, 32, 32);
        auto heads = component_centroids(pose_part_mask(img, PosePart::Head));
        CHECK(heads.size() == 1);
        CHECK(component_centroids(pose_part_mask(img, PosePart::Torso)).empty());
        CHECK(component_centroids(pose_part_mask(img, PosePart::Arms)).empty());
        CHECK(component_centroids(pose_part_mask(img, PosePart::Legs)).empty());
    }
    SUBCASE("two-person annotation: component count per color equals part count") {
        TaskSet t = generate_synthetic_tasks(TaskKind::Pose, 8, 0, 21, 32, 32);
        for (size_t i = 0; i < t.train.size(); ++i) {
            const PoseAnnotation& a = t.train_truth.poses[i];
            const Image& target = t.train[i].target;
            for (int part = 0; part < kPoseParts; ++part) {
                auto comps = component_centroids(pose_part_mask(target, static_cast<PosePart>(part)));
                CHECK(comps.size() == a.centroids[static_cast<size_t>(part)].size());
            }
        }
    }
}

TEST_CASE("classification grid build/decode") {
    auto symbols = default_symbols();
    RngStream rng(5);
    std::vector<Image> tiles;
    std::array<int, 16> labels{};
    for (int i = 0; i < 16; ++i) {
        labels[static_cast<size_t>(i)] = static_cast<int>(rng.randint(7));
        Image t(8, 8);
        for (auto& v : t.px) v = static_cast<float>(rng.uniform(-1, 1));
        tiles.push_back(t);
    }
    auto [input, target] = build_classification_grid(tiles, labels, symbols);
    CHECK(input.h == 32);
    CHECK(target.w == 32);

    SUBCASE("decode on the clean target recovers all 16 labels") {
        CHECK(decode_classification_grid(target, symbols) == labels);
    }
    SUBCASE("decode survives per-pixel noise of 0.05") {
        // derived check: the smallest L2 gap between symbol tiles dwarfs the
        // worst-case displacement of amplitude-0.05 noise
        int th = 8, tw = 8;
        double min_gap = 1e30;
        for (size_t a = 0; a < symbols.size(); ++a)
            for (size_t b = a + 1; b < symbols.size(); ++b) {
                Image ia = render_symbol_tile(symbols[a], th, tw);
                Image ib = render_symbol_tile(symbols[b], th, tw);
                double d = 0;
                for (size_t j = 0; j < ia.px.size(); ++j) {
                    double e = ia.px[j] - ib.px[j];
                    d += e * e;
                }
                min_gap = std::min(min_gap, std::sqrt(d));
            }
        double noise_norm = 0.05 * std::sqrt(static_cast<double>(th) * tw * 3);
        CHECK(noise_norm < min_gap / 2);

        Image noisy = target;
        for (auto& v : noisy.px) v += static_cast<float>(rng.uniform(-0.05, 0.05));
        CHECK(decode_classification_grid(noisy, symbols) == labels);
    }
    SUBCASE("tile size mismatch is rejected") {
        tiles[3] = Image(9, 8);
        CHECK_THROWS_AS(build_classification_grid(tiles, labels, symbols), ValidationError);
    }
    SUBCASE("all-same-class input yields 16 identical symbol tiles") {
        std::array<int, 16> same{};
        same.fill(2);
        auto [in2, tgt2] = build_classification_grid(tiles, same, symbols);
        Image ref = render_symbol_tile(symbols[2], 8, 8);
        for (int i = 0; i < 16; ++i) {
            int r = i / 4, c = i % 4;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        CHECK(tgt2.at(r * 8 + y, c * 8 + x, ch) == ref.at(y, x, ch));
        }
    }
}

TEST_CASE("synthetic generators") {
    SUBCASE("same seed gives a bit-identical task set") {
        for (TaskKind k : {TaskKind::Segmentation, TaskKind::Pose, TaskKind::Colorization,
                           TaskKind::Jigsaw, TaskKind::Inpainting, TaskKind::Arc,
                           TaskKind::ClassificationGrid, TaskKind::Generic}) {
            TaskSet a = generate_synthetic_tasks(k, 3, 2, 42, 32, 32);
            TaskSet b = generate_synthetic_tasks(k, 3, 2, 42, 32, 32);
            CHECK(taskset_hash(a) == taskset_hash(b));
            CHECK(a.train.size() == 3);
            CHECK(a.test.size() == 2);
        }
    }
    SUBCASE("segmentation targets decode to the generator's masks") {
        TaskSet t = generate_synthetic_tasks(TaskKind::Segmentation, 4, 2, 11, 32, 32);
        for (size_t i = 0; i < t.train.size(); ++i)
            CHECK(mask_decode(t.train[i].target) == t.train_truth.masks[i]);
    }
    SUBCASE("pose targets self-match with rate 1.0") {
        TaskSet t = generate_synthetic_tasks(TaskKind::Pose, 4, 0, 3, 32, 32);
        for (size_t i = 0; i < t.train.size(); ++i) {
            auto r = match_rate(t.train[i].target, t.train_truth.poses[i]);
            CHECK(r.defined);
            CHECK(r.rate == doctest::Approx(1.0));
        }
    }
    SUBCASE("all renderers stay within [-1, 1]") {
        for (TaskKind k : {TaskKind::Segmentation, TaskKind::Pose, TaskKind::Arc, TaskKind::Generic}) {
            TaskSet t = generate_synthetic_tasks(k, 2, 1, 9, 32, 32);
            for (const auto& pr : t.train)
                for (float v : pr.input.px) {
                    REQUIRE(v >= -1.0f);
                    REQUIRE(v <= 1.0f);
                }
        }
    }
    SUBCASE("unknown kind is rejected") {
        CHECK_THROWS_AS(generate_synthetic_tasks(TaskKind::Segmentation, 0, 1, 1, 32, 32),
                        ValidationError);
    }
}

TEST_CASE("png io roundtrip preserves 8-bit quantized values") {
    auto dir = std::filesystem::temp_directory_path() / "taskvid_png_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "img.png").string();
    RngStream rng(31);
    Image img(16, 16);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform(-1, 1));
    // quantize first so the roundtrip is exact
    for (auto& v : img.px) v = from_byte(to_byte(v));
    write_png(path, img);
    Image back = read_png(path);
    REQUIRE(back.h == img.h);
    REQUIRE(back.w == img.w);
    for (size_t i = 0; i < img.px.size(); ++i) REQUIRE(back.px[i] == img.px[i]);
}
