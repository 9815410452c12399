#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taskvid/errors.hpp"
#include "taskvid/interp.hpp"
#include "taskvid/rng.hpp"
#include "taskvid/synth.hpp"

using namespace taskvid;

namespace {

Image random_image(RngStream& rng, int h = 8, int w = 8) {
    Image img(h, w);
    for (auto& v : img.px) v = static_cast<float>(rng.uniform(-1, 1));
    return img;
}

}  // namespace

TEST_CASE("endpoints are exact for every variant") {
    RngStream rng(1);
    Image x = random_image(rng), y = random_image(rng);
    for (InterpVariant var : {InterpVariant::Linear, InterpVariant::Quadratic, InterpVariant::Discrete,
                              InterpVariant::Tiles}) {
        InterpMethod m{var, 2, 2};
        Video v = interpolate(x, y, 9, m);
        for (size_t i = 0; i < x.px.size(); ++i) {
            REQUIRE(v.frame(0)[i] == x.px[i]);
            REQUIRE(v.frame(8)[i] == y.px[i]);
        }
    }
}

TEST_CASE("linear midpoint of F=9 is the exact average") {
    RngStream rng(2);
    Image x = random_image(rng), y = random_image(rng);
    Video v = interpolate(x, y, 9, {InterpVariant::Linear});
    for (size_t i = 0; i < x.px.size(); ++i)
        CHECK(v.frame(4)[i] == doctest::Approx(0.5f * x.px[i] + 0.5f * y.px[i]));
}

TEST_CASE("discrete switches exactly at the halfway rule") {
    RngStream rng(3);
    Image x = random_image(rng), y = random_image(rng);
    Video v = interpolate(x, y, 9, {InterpVariant::Discrete});
    // frames 1..5 equal x, 6..9 equal y (1-based)
    for (int f = 0; f < 5; ++f)
        for (size_t i = 0; i < x.px.size(); ++i) REQUIRE(v.frame(f)[i] == x.px[i]);
    for (int f = 5; f < 9; ++f)
        for (size_t i = 0; i < y.px.size(); ++i) REQUIRE(v.frame(f)[i] == y.px[i]);
}

TEST_CASE("quadratic F=3 midpoint weights 0.75/0.25") {
    RngStream rng(4);
    Image x = random_image(rng), y = random_image(rng);
    Video v = interpolate(x, y, 3, {InterpVariant::Quadratic});
    for (size_t i = 0; i < x.px.size(); ++i)
        CHECK(v.frame(1)[i] == doctest::Approx(0.75f * x.px[i] + 0.25f * y.px[i]));
}

TEST_CASE("linear and quadratic are monotone wherever the target exceeds the source") {
    RngStream rng(5);
    Image x = random_image(rng), y = random_image(rng);
    for (InterpVariant var : {InterpVariant::Linear, InterpVariant::Quadratic}) {
        Video v = interpolate(x, y, 7, {var});
        for (size_t i = 0; i < x.px.size(); ++i) {
            if (y.px[i] <= x.px[i]) continue;
            for (int f = 0; f + 1 < 7; ++f) REQUIRE(v.frame(f)[i] <= v.frame(f + 1)[i]);
        }
    }
}

TEST_CASE("discrete has exactly one change point per pixel") {
    RngStream rng(6);
    Image x = random_image(rng), y = random_image(rng);
    Video v = interpolate(x, y, 8, {InterpVariant::Discrete});
    for (size_t i = 0; i < x.px.size(); ++i) {
        int changes = 0;
        for (int f = 0; f + 1 < 8; ++f)
            if (v.frame(f)[i] != v.frame(f + 1)[i]) ++changes;
        if (x.px[i] != y.px[i]) REQUIRE(changes == 1);
    }
}

TEST_CASE("tiles switch each tile exactly once, in raster order") {
    RngStream rng(7);
    Image x = random_image(rng), y = random_image(rng);
    InterpMethod m{InterpVariant::Tiles, 2, 2};
    Video v = interpolate(x, y, 9, m);
    int th = 4, tw = 4;
    std::vector<int> switch_frame(4, -1);
    for (int t = 0; t < 4; ++t) {
        int y0 = (t / 2) * th, x0 = (t % 2) * tw;
        for (int f = 0; f < 9; ++f) {
            bool is_target = true;
            for (int yy = y0; yy < y0 + th && is_target; ++yy)
                for (int xx = x0; xx < x0 + tw && is_target; ++xx)
                    for (int c = 0; c < 3; ++c)
                        if (v.frame(f)[(static_cast<size_t>(yy) * 8 + xx) * 3 + c] !=
                            y.px[(static_cast<size_t>(yy) * 8 + xx) * 3 + c])
                            is_target = false;
            if (is_target) {
                switch_frame[static_cast<size_t>(t)] = f;
                break;
            }
        }
        REQUIRE(switch_frame[static_cast<size_t>(t)] >= 0);
    }
    // raster order: earlier tiles never switch after later ones
    for (int t = 0; t + 1 < 4; ++t)
        CHECK(switch_frame[static_cast<size_t>(t)] <= switch_frame[static_cast<size_t>(t + 1)]);
}

TEST_CASE("validation errors") {
    RngStream rng(8);
    Image x = random_image(rng), y = random_image(rng, 8, 10);
    CHECK_THROWS_AS(interpolate(x, y, 9, {InterpVariant::Linear}), ValidationError);
    Image z = random_image(rng);
    CHECK_THROWS_AS(interpolate(x, z, 1, {InterpVariant::Linear}), ValidationError);
    CHECK_THROWS_AS(interpolate(x, z, 9, {InterpVariant::Tiles, 3, 3}), ValidationError);
}

TEST_CASE("video dataset is order-preserving and deterministic") {
    TaskSet t = generate_synthetic_tasks(TaskKind::Segmentation, 3, 0, 77, 32, 32);
    auto vids = build_video_dataset(t, 9, {InterpVariant::Linear});
    REQUIRE(vids.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        for (size_t j = 0; j < t.train[i].input.px.size(); ++j) {
            REQUIRE(vids[i].frame(0)[j] == t.train[i].input.px[j]);
            REQUIRE(vids[i].frame(8)[j] == t.train[i].target.px[j]);
        }
    }
    auto vids2 = build_video_dataset(t, 9, {InterpVariant::Linear});
    for (size_t i = 0; i < 3; ++i) CHECK(video_hash(vids[i]) == video_hash(vids2[i]));
}
