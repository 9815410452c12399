#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "taskvid/errors.hpp"
#include "taskvid/lora.hpp"
#include "taskvid/rng.hpp"

using namespace taskvid;

namespace {

ModelConfig six_block_config() {
    ModelConfig c;
    c.frames = 2;
    c.height = 8;
    c.width = 8;
    c.patch = 4;
    c.dim = 32;
    c.heads = 4;
    c.blocks = 6;
    c.tsteps = 4;
    return c;
}

}  // namespace

TEST_CASE("attach produces zero-initialized B and the exact layer set") {
    ModelConfig cfg = six_block_config();
    auto params = init_params<float>(cfg, 1);
    auto adapter = lora_attach(params, TargetSpec::QKVO, 8, 32.0, 2);

    CHECK(adapter.layers.size() == 24);  // 4 projections x 6 blocks
    for (const auto& [name, ab] : adapter.layers) {
        for (float b : ab.second.v) REQUIRE(b == 0.0f);
        CHECK(ab.first.rows() == 8);
        CHECK(ab.second.cols() == 8);
    }
    // trainable parameter count: sum of r*(d+k) over layers
    int64_t expect = 0;
    for (const auto& name : resolve_targets(cfg, TargetSpec::QKVO)) {
        const auto& t = params.get(name);
        expect += 8LL * (t.rows() + t.cols());
    }
    CHECK(adapter.trainable_numel() == expect);
}

TEST_CASE("target specs resolve to the documented layer families") {
    ModelConfig cfg = six_block_config();
    CHECK(resolve_targets(cfg, TargetSpec::QK).size() == 12);
    CHECK(resolve_targets(cfg, TargetSpec::VO).size() == 12);
    CHECK(resolve_targets(cfg, TargetSpec::QKVO).size() == 24);
    // all matrix-multiply layers except embeddings: qkvo + 2 mlp per block,
    // plus conditioning projection and output head
    CHECK(resolve_targets(cfg, TargetSpec::AllLinear).size() == 6u * 6 + 2);
    for (const auto& n : resolve_targets(cfg, TargetSpec::AllLinear))
        CHECK(n.rfind("embed.", 0) != 0);
}

TEST_CASE("rank cap is enforced") {
    ModelConfig cfg = six_block_config();   // dim 32 -> cap 16 for qkvo
    auto params = init_params<float>(cfg, 1);
    CHECK(lora_rank_cap(cfg, TargetSpec::QKVO) == 16);
    CHECK(lora_rank_cap(cfg, TargetSpec::AllLinear) == 16);  // limited by d x d layers
    CHECK_NOTHROW(lora_attach(params, TargetSpec::QKVO, 16, 32.0, 3));
    CHECK_THROWS_AS(lora_attach(params, TargetSpec::QKVO, 17, 32.0, 3), ValidationError);
}

TEST_CASE("effective weight arithmetic") {
    SUBCASE("zero B returns the base exactly") {
        Tensor<float> base({4, 4});
        RngStream rng(5);
        for (auto& v : base.v) v = static_cast<float>(rng.normal());
        Tensor<float> A({2, 4});
        for (auto& v : A.v) v = static_cast<float>(rng.normal());
        Tensor<float> B({4, 2});  // zeros
        Tensor<float> eff = lora_effective_weight(base, A, B, 32.0, 2);
        for (size_t i = 0; i < base.v.size(); ++i) REQUIRE(eff.v[i] == base.v[i]);
    }
    SUBCASE("rank-1 update matches the hand-computed outer product") {
        // base 2x2 zeros, A = [1 2], B = [3 4]^T, alpha 6, r 1 -> delta = 6 * B A
        Tensor<double> base({2, 2});
        Tensor<double> A({1, 2});
        A.v = {1.0, 2.0};
        Tensor<double> B({2, 1});
        B.v = {3.0, 4.0};
        Tensor<double> eff = lora_effective_weight(base, A, B, 6.0, 1);
        CHECK(eff.at(0, 0) == doctest::Approx(6.0 * 3 * 1));
        CHECK(eff.at(0, 1) == doctest::Approx(6.0 * 3 * 2));
        CHECK(eff.at(1, 0) == doctest::Approx(6.0 * 4 * 1));
        CHECK(eff.at(1, 1) == doctest::Approx(6.0 * 4 * 2));
    }
    SUBCASE("effective weight is linear in B") {
        RngStream rng(6);
        Tensor<double> base({3, 3}), A({2, 3}), B1({3, 2}), B2({3, 2});
        for (auto& v : base.v) v = rng.normal();
        for (auto& v : A.v) v = rng.normal();
        for (auto& v : B1.v) v = rng.normal();
        for (auto& v : B2.v) v = rng.normal();
        Tensor<double> Bsum = B1;
        Bsum.add_(B2);
        Tensor<double> lhs = lora_effective_weight(base, A, Bsum, 8.0, 2);
        Tensor<double> e1 = lora_effective_weight(base, A, B1, 8.0, 2);
        Tensor<double> e2 = lora_effective_weight(base, A, B2, 8.0, 2);
        for (size_t i = 0; i < lhs.v.size(); ++i)
            REQUIRE(lhs.v[i] == doctest::Approx(e1.v[i] + e2.v[i] - base.v[i]).epsilon(1e-12));
    }
    SUBCASE("alpha/r scaling: doubling r with zero B changes nothing") {
        ModelConfig cfg = six_block_config();
        auto params = init_params<float>(cfg, 7);
        auto a4 = lora_attach(params, TargetSpec::QKVO, 4, 32.0, 8);
        auto a8 = lora_attach(params, TargetSpec::QKVO, 8, 32.0, 8);
        RngStream rng(9);
        Video v(cfg.frames, cfg.height, cfg.width);
        for (auto& x : v.px) x = static_cast<float>(rng.uniform(-1, 1));
        Image cond = v.frame_image(0);
        Video base_out = denoiser_forward(params, nullptr, v, 1, cond);
        Video o4 = denoiser_forward(params, &a4, v, 1, cond);
        Video o8 = denoiser_forward(params, &a8, v, 1, cond);
        REQUIRE(video_hash(o4) == video_hash(base_out));
        REQUIRE(video_hash(o8) == video_hash(base_out));
    }
}

TEST_CASE("merge folds the adapter and preserves the base") {
    ModelConfig cfg = six_block_config();
    auto params = init_params<float>(cfg, 10);
    auto adapter = lora_attach(params, TargetSpec::QKVO, 8, 32.0, 11);
    RngStream rng(12);
    for (auto& [name, ab] : adapter.layers)
        for (auto& x : ab.second.v) x = static_cast<float>(0.02 * rng.normal());

    uint64_t base_hash = params_hash(params);
    auto merged = lora_merge(params, adapter);
    CHECK(params_hash(params) == base_hash);  // merge is a pure function

    SUBCASE("merged forward agrees with adapter forward on 10 random inputs") {
        for (int trial = 0; trial < 10; ++trial) {
            Video v(cfg.frames, cfg.height, cfg.width);
            for (auto& x : v.px) x = static_cast<float>(rng.uniform(-1, 1));
            Image cond = v.frame_image(0);
            Video via_adapter = denoiser_forward(params, &adapter, v, 1, cond);
            Video via_merge = denoiser_forward(merged, nullptr, v, 1, cond);
            float max_diff = 0;
            for (size_t i = 0; i < via_adapter.px.size(); ++i)
                max_diff = std::max(max_diff, std::abs(via_adapter.px[i] - via_merge.px[i]));
            REQUIRE(max_diff < 1e-5f);
        }
    }
    SUBCASE("merging a zero adapter is the identity") {
        auto zero_adapter = lora_attach(params, TargetSpec::QKVO, 8, 32.0, 13);
        auto same = lora_merge(params, zero_adapter);
        CHECK(params_hash(same) == base_hash);
    }
}

TEST_CASE("adapter hash tracks contents") {
    ModelConfig cfg = six_block_config();
    auto params = init_params<float>(cfg, 20);
    auto a = lora_attach(params, TargetSpec::VO, 4, 32.0, 21);
    auto b = lora_attach(params, TargetSpec::VO, 4, 32.0, 21);
    CHECK(adapter_hash(a) == adapter_hash(b));
    b.layers.begin()->second.second.v[0] = 1.0f;
    CHECK(adapter_hash(a) != adapter_hash(b));
}
