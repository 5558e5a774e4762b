#include <catch2/catch_amalgamated.hpp>

#include "viti/codec.hpp"
#include "viti/latent_ops.hpp"
#include "viti/rng.hpp"

using namespace viti;

namespace {

Video random_video(int64_t n, int64_t h, int64_t w, uint64_t seed) {
    RngStream rng(seed);
    return Video(rng.uniform_tensor({n, h, w, 3}, -1.0, 1.0));
}

MaskVideo box_mask(int64_t n, int64_t h, int64_t w, int64_t y0, int64_t y1, int64_t x0, int64_t x1) {
    Tensor m({n, h, w, 1});
    for (int64_t f = 0; f < n; ++f)
        for (int64_t y = y0; y < y1; ++y)
            for (int64_t x = x0; x < x1; ++x)
                m.at(f, y, x, 0) = 1.0;
    return MaskVideo(std::move(m));
}

}  // namespace

TEST_CASE("temporal groups follow the causal mapping") {
    auto g = temporal_groups(8, 2);
    REQUIRE(g.size() == 5);  // {0},{1,2},{3,4},{5,6},{7}
    REQUIRE(g[0] == std::pair<int64_t, int64_t>{0, 1});
    REQUIRE(g[1] == std::pair<int64_t, int64_t>{1, 3});
    REQUIRE(g[4] == std::pair<int64_t, int64_t>{7, 8});
    REQUIRE(latent_frames_for(9, 2) == 5);  // divisible case: 1 + (N-1)/f_t
    REQUIRE(latent_frames_for(1, 4) == 1);
    REQUIRE(latent_frames_for(6, 1) == 6);
}

TEST_CASE("make_agnostic basics") {
    Video v = random_video(2, 4, 4, 10);

    SECTION("all-zeros mask is the identity") {
        MaskVideo m(Tensor::zeros({2, 4, 4, 1}));
        Video out = make_agnostic(v, m);
        REQUIRE(max_abs_diff(out.data, v.data) == 0.0);
    }
    SECTION("all-ones mask zeroes the video") {
        MaskVideo m(Tensor::full({2, 4, 4, 1}, 1.0));
        Video out = make_agnostic(v, m);
        for (double x : out.data.data)
            REQUIRE(x == 0.0);
    }
    SECTION("2x2 box on a constant-one video: zeros exactly inside, ones outside") {
        Video ones(Tensor::full({1, 4, 4, 3}, 1.0));
        MaskVideo m = box_mask(1, 4, 4, 1, 3, 1, 3);
        Video out = make_agnostic(ones, m);
        // independent elementwise oracle
        for (int64_t y = 0; y < 4; ++y)
            for (int64_t x = 0; x < 4; ++x)
                for (int64_t c = 0; c < 3; ++c) {
                    double expect = (y >= 1 && y < 3 && x >= 1 && x < 3) ? 0.0 : 1.0;
                    REQUIRE(out.data.at(0, y, x, c) == expect);
                }
    }
    SECTION("idempotent under the same mask") {
        MaskVideo m = box_mask(2, 4, 4, 0, 2, 1, 4);
        Video once = make_agnostic(v, m);
        Video twice = make_agnostic(once, m);
        REQUIRE(max_abs_diff(once.data, twice.data) == 0.0);
    }
    SECTION("misaligned mask raises an alignment error") {
        MaskVideo m(Tensor::zeros({2, 4, 5, 1}));
        REQUIRE_THROWS_AS(make_agnostic(v, m), AlignmentError);
    }
}

TEST_CASE("composite_output selects per pixel") {
    Video orig = random_video(2, 4, 6, 20);
    Video gen = random_video(2, 4, 6, 21);

    SECTION("all-zeros mask returns the original") {
        MaskVideo m(Tensor::zeros({2, 4, 6, 1}));
        REQUIRE(max_abs_diff(composite_output(gen, orig, m).data, orig.data) == 0.0);
    }
    SECTION("all-ones mask returns the generated clip") {
        MaskVideo m(Tensor::full({2, 4, 6, 1}, 1.0));
        REQUIRE(max_abs_diff(composite_output(gen, orig, m).data, gen.data) == 0.0);
    }
    SECTION("half mask matches the elementwise oracle") {
        MaskVideo m = box_mask(2, 4, 6, 0, 4, 0, 3);
        Video out = composite_output(gen, orig, m);
        for (int64_t f = 0; f < 2; ++f)
            for (int64_t y = 0; y < 4; ++y)
                for (int64_t x = 0; x < 6; ++x)
                    for (int64_t c = 0; c < 3; ++c) {
                        double mm = m.data.at(f, y, x, 0);
                        double expect = gen.data.at(f, y, x, c) * mm + orig.data.at(f, y, x, c) * (1 - mm);
                        REQUIRE(out.data.at(f, y, x, c) == expect);
                    }
    }
}

TEST_CASE("reshape_mask preserves emptiness, fullness and aligned coverage") {
    SECTION("ones map to ones, zeros to zeros") {
        MaskVideo ones(Tensor::full({5, 8, 8, 1}, 1.0));
        MaskVideo zeros(Tensor::zeros({5, 8, 8, 1}));
        LatentGeometry g = latent_geometry(5, 8, 8, 2, 2);
        LatentMask lm1 = reshape_mask(ones, g, 2, 2);
        LatentMask lm0 = reshape_mask(zeros, g, 2, 2);
        for (double v : lm1.data.data)
            REQUIRE(v == 1.0);
        for (double v : lm0.data.data)
            REQUIRE(v == 0.0);
    }
    SECTION("left-half mask at f_s=2 keeps the halves and the mean") {
        int64_t N = 3, H = 8, W = 8;
        MaskVideo m = box_mask(N, H, W, 0, H, 0, W / 2);
        LatentGeometry g = latent_geometry(N, H, W, 2, 1);
        LatentMask lm = reshape_mask(m, g, 2, 1);
        for (int64_t t = 0; t < g.frames; ++t)
            for (int64_t y = 0; y < g.height; ++y)
                for (int64_t x = 0; x < g.width; ++x) {
                    double v = lm.data.at(t, y, x, 0);
                    REQUIRE(v == ((x < g.width / 2) ? 1.0 : 0.0));
                }
        // coverage oracle: mean before vs after
        double before = mean(m.data);
        double after = mean(lm.data);
        REQUIRE_THAT(after, Catch::Matchers::WithinAbs(before, 1.0 / static_cast<double>(g.width)));
    }
    SECTION("factor-aligned time-invariant masks preserve the mean to 1e-6") {
        int64_t N = 5, H = 8, W = 12;
        MaskVideo m = box_mask(N, H, W, 2, 6, 4, 10);  // aligned to f_s=2 boundaries
        LatentGeometry g = latent_geometry(N, H, W, 2, 2);
        LatentMask lm = reshape_mask(m, g, 2, 2);
        REQUIRE_THAT(mean(lm.data), Catch::Matchers::WithinAbs(mean(m.data), 1e-6));
    }
    SECTION("any masked pixel frame activates its latent frame") {
        // frame 1 masked only; its causal group is latent frame 1
        Tensor md = Tensor::zeros({4, 4, 4, 1});
        for (int64_t y = 0; y < 4; ++y)
            for (int64_t x = 0; x < 4; ++x)
                md.at(1, y, x, 0) = 1.0;
        MaskVideo m(std::move(md));
        LatentGeometry g = latent_geometry(4, 4, 4, 1, 2);
        LatentMask lm = reshape_mask(m, g, 1, 2);
        REQUIRE(lm.data.at(1, 0, 0, 0) == 1.0);  // group {1,2} max-pools to 1
        REQUIRE(lm.data.at(0, 0, 0, 0) == 0.0);
        REQUIRE(lm.data.at(2, 0, 0, 0) == 0.0);
    }
    SECTION("inconsistent target dims raise a configuration error") {
        MaskVideo m(Tensor::zeros({4, 8, 8, 1}));
        LatentGeometry bad{4, 4, 4};  // frames should be 3 for f_t=2
        REQUIRE_THROWS_AS(reshape_mask(m, bad, 2, 2), ConfigError);
    }
}

TEST_CASE("fuse_inputs adds the three parts with channel-broadcast mask") {
    RngStream rng(31);
    int64_t T = 2, h = 3, w = 4, C = 5;

    SECTION("zero mask and zero masked-latent pass z_t through") {
        LatentVideo zt(rng.normal_tensor({T, h, w, C}), 1, 1);
        LatentVideo ml(Tensor::zeros({T, h, w, C}), 1, 1);
        LatentMask mz(Tensor::zeros({T, h, w, 1}));
        REQUIRE(max_abs_diff(fuse_inputs(zt, mz, ml).data, zt.data) == 0.0);
    }
    SECTION("unit mask over zeros gives all-ones across channels") {
        LatentVideo zt(Tensor::zeros({T, h, w, C}), 1, 1);
        LatentVideo ml(Tensor::zeros({T, h, w, C}), 1, 1);
        LatentMask mz(Tensor::full({T, h, w, 1}, 1.0));
        Tensor out = fuse_inputs(zt, mz, ml).data;
        for (double v : out.data)
            REQUIRE(v == 1.0);
    }
    SECTION("random tensors match the naive loop oracle") {
        Tensor a = rng.normal_tensor({T, h, w, C});
        Tensor b = rng.normal_tensor({T, h, w, C});
        Tensor m = rng.uniform_tensor({T, h, w, 1}, 0.0, 1.0);
        Tensor out = fuse_inputs_raw(a, m, b);
        for (int64_t t = 0; t < T; ++t)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    for (int64_t c = 0; c < C; ++c) {
                        double expect = a.at(t, y, x, c) + b.at(t, y, x, c) + m.at(t, y, x, 0);
                        REQUIRE(out.at(t, y, x, c) == expect);
                    }
    }
    SECTION("linear in each argument (superposition)") {
        Tensor a1 = rng.normal_tensor({T, h, w, C}), a2 = rng.normal_tensor({T, h, w, C});
        Tensor b = rng.normal_tensor({T, h, w, C});
        Tensor m = rng.uniform_tensor({T, h, w, 1}, 0.0, 1.0);
        Tensor zero_m = Tensor::zeros({T, h, w, 1});
        Tensor zero = Tensor::zeros({T, h, w, C});
        Tensor lhs = fuse_inputs_raw(add(a1, a2), m, b);
        Tensor rhs = add(fuse_inputs_raw(a1, m, b), fuse_inputs_raw(a2, zero_m, zero));
        REQUIRE(max_abs_diff(lhs, rhs) < 1e-12);
    }
    SECTION("shape mismatch raises an alignment error") {
        LatentVideo zt(Tensor::zeros({T, h, w, C}), 1, 1);
        LatentVideo ml(Tensor::zeros({T, h, w + 1, C}), 1, 1);
        LatentMask mz(Tensor::zeros({T, h, w, 1}));
        REQUIRE_THROWS_AS(fuse_inputs(zt, mz, ml), AlignmentError);
    }
}

TEST_CASE("identity codec roundtrip is exact equality") {
    IdentityCodec codec;
    Video v = random_video(3, 6, 4, 55);
    LatentVideo z = codec.encode(v);
    REQUIRE(z.frames() == 3);
    REQUIRE(z.channels() == 3);
    Video back = codec.decode(z);
    REQUIRE(max_abs_diff(back.data, v.data) == 0.0);
}

TEST_CASE("orthogonal codec roundtrips within float tolerance") {
    OrthogonalCodec codec(7);

    SECTION("divisible frame count") {
        Video v = random_video(9, 8, 8, 56);
        LatentVideo z = codec.encode(v);
        REQUIRE(z.frames() == 5);
        REQUIRE(z.height() == 4);
        REQUIRE(z.width() == 4);
        REQUIRE(z.channels() == 24);
        Video back = codec.decode(z);
        REQUIRE(max_abs_diff(back.data, v.data) < 1e-12);
    }
    SECTION("trailing partial temporal group") {
        Video v = random_video(8, 4, 6, 57);
        LatentVideo z = codec.encode(v);
        REQUIRE(z.frames() == 5);
        REQUIRE(z.source_frames == 8);
        Video back = codec.decode(z);
        REQUIRE(back.frames() == 8);
        REQUIRE(max_abs_diff(back.data, v.data) < 1e-12);
    }
    SECTION("indivisible spatial dims rejected") {
        Video v = random_video(3, 6, 5, 58);
        REQUIRE_THROWS_AS(codec.encode(v), ContractError);
    }
}

TEST_CASE("codec registry") {
    REQUIRE(make_codec("identity")->latent_channels() == 3);
    REQUIRE(make_codec("ortho2x")->latent_channels() == 24);
    REQUIRE_THROWS_AS(make_codec("nope"), ConfigError);
}
