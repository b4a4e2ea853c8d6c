#include <gtest/gtest.h>

#include "i2vwm/core/rng.hpp"
#include "i2vwm/model/jnd.hpp"

#include "loop_oracles.hpp"

using namespace i2vwm;

namespace {

Image constant_image(int h, int w, float v) {
    Image img(h, w, 3);
    for (auto& p : img.px) p = v;
    return img;
}

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, 3);
    for (auto& v : img.px) v = rng.uniform_float();
    return img;
}

// Luminance-adaptation floor of the profile, evaluated independently in
// the 0..255 domain.
double luminance_floor_ref(double bg) {
    if (bg <= 127.0) return 17.0 * (1.0 - std::sqrt(bg / 127.0)) + 3.0;
    return (3.0 / 128.0) * (bg - 127.0) + 3.0;
}

} // namespace

TEST(Jnd, MidGrayMatchesLuminanceFloor) {
    // flat mid-gray: no texture term, every pixel sits at the luminance
    // adaptation floor evaluated at gray level 128
    const Image img = constant_image(24, 24, 0.5f);
    const Image t = jnd_map(img);
    const double expected = luminance_floor_ref(128.0) / 255.0;
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) EXPECT_NEAR(t.at(y, x, 0), expected, 1e-7);
}

TEST(Jnd, BlackExceedsMidGray) {
    const Image black = constant_image(24, 24, 0.0f);
    const Image mid = constant_image(24, 24, 0.5f);
    const double tb = jnd_map(black).at(12, 12, 0);
    const double tm = jnd_map(mid).at(12, 12, 0);
    EXPECT_GT(tb, tm);
    EXPECT_NEAR(tb, luminance_floor_ref(0.0) / 255.0, 1e-7);
}

TEST(Jnd, NonnegativeAndLuminanceOnly) {
    const Image img = random_image(32, 32, 3);
    const Image t = jnd_map(img);
    for (auto v : t.px) EXPECT_GE(v, 0.0f);

    // shuffling chroma while preserving luma leaves the map unchanged
    Image swapped = img;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            // rotate channels in a luma-preserving way: keep Y fixed by
            // construction (use gray with the same luma)
            const float g = luma_at(img, y, x);
            swapped.at(y, x, 0) = g;
            swapped.at(y, x, 1) = g;
            swapped.at(y, x, 2) = g;
        }
    const Image t2 = jnd_map(swapped);
    for (std::size_t i = 0; i < t.px.size(); ++i) EXPECT_NEAR(t.px[i], t2.px[i], 2e-3f);
}

TEST(Jnd, EdgesGetLargerThresholds) {
    // strong luminance step at x = 16: masking raises the threshold at the
    // edge relative to the flat interior
    Image img(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = x < 16 ? 0.15f : 0.85f;
    const Image t = jnd_map(img);
    EXPECT_GT(t.at(16, 16, 0), t.at(16, 26, 0));
    EXPECT_GT(t.at(16, 16, 0), t.at(16, 5, 0));
}

TEST(FuseJnd, LambdaZeroIsExactIdentity) {
    const Image io = random_image(24, 24, 5);
    const Image wi = random_image(24, 24, 6);
    const Image fused = fuse_jnd(io, wi, 0.0);
    EXPECT_EQ(max_abs_diff(fused, io), 0.0);
}

TEST(FuseJnd, ZeroResidualIsIdentity) {
    const Image io = random_image(24, 24, 7);
    const Image fused = fuse_jnd(io, io, 1.5);
    EXPECT_EQ(max_abs_diff(fused, io), 0.0);
}

TEST(FuseJnd, MatchesScalarLoopOracle) {
    const Image io = random_image(32, 32, 8);
    const Image wi = random_image(32, 32, 9);
    const Image t = jnd_map(io);
    const Image got = fuse_jnd(io, wi, 1.5);
    const Image want = i2vwm::testing::fuse_loop(io, wi, t, 1.5);
    EXPECT_LE(max_abs_diff(got, want), 1e-6);
}

TEST(FuseJnd, EnvelopeAndMonotonicity) {
    const Image io = random_image(32, 32, 10);
    const Image wi = random_image(32, 32, 11);
    const Image t = jnd_map(io);
    float tmax = 0.0f;
    for (auto v : t.px) tmax = std::max(tmax, v);

    for (double lambda : {0.0, 0.5, 1.0, 1.5, 3.0}) {
        const Image fused = fuse_jnd(io, wi, lambda);
        EXPECT_LE(max_abs_diff(fused, io), lambda * tmax + 1e-6);
    }
    // max deviation is monotone in lambda
    double prev = 0.0;
    for (double lambda : {0.0, 0.5, 1.0, 1.5, 3.0}) {
        const double dev = max_abs_diff(fuse_jnd(io, wi, lambda), io);
        EXPECT_GE(dev + 1e-9, prev);
        prev = dev;
    }
    EXPECT_THROW(fuse_jnd(io, Image(16, 16, 3), 1.0), std::invalid_argument);
    EXPECT_THROW(fuse_jnd(io, wi, -1.0), std::invalid_argument);
}
