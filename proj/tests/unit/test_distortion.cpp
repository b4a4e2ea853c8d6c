#include <gtest/gtest.h>

#include <cmath>

#include "i2vwm/distortion/classical.hpp"
#include "i2vwm/distortion/noise_layer.hpp"
#include "i2vwm/distortion/pool.hpp"
#include "i2vwm/distortion/warp.hpp"

#include "gradcheck.hpp"
#include "jpeg_reference.hpp"
#include "loop_oracles.hpp"

using namespace i2vwm;

namespace {

Image random_image(int h, int w, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    Rng rng(seed);
    Image img(h, w, 3);
    for (auto& v : img.px) v = lo + (hi - lo) * rng.uniform_float();
    return img;
}

Image ramp_image(int h, int w) {
    Image img(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = float(x) / float(w - 1);
            img.at(y, x, 1) = float(y) / float(h - 1);
            img.at(y, x, 2) = 0.5f * (img.at(y, x, 0) + img.at(y, x, 1));
        }
    return img;
}

DistortionSpec make_spec(DistortionKind k, std::map<std::string, double> params = {}) {
    DistortionSpec s;
    s.kind = k;
    s.params = std::move(params);
    return s;
}

} // namespace

// ---- Noise pool reweighting ---------------------------------------------

TEST(NoisePool, ReweightHandCases) {
    auto pool = NoisePool::uniform(default_training_families(false));
    ASSERT_EQ(pool.families.size(), 10u);

    auto two = NoisePool::uniform(
        {default_training_families(false)[0], default_training_families(false)[1]});
    auto w = reweight_pool(two, {0.02, 0.02});
    EXPECT_DOUBLE_EQ(w.weights[0], 0.5);
    EXPECT_DOUBLE_EQ(w.weights[1], 0.5);

    w = reweight_pool(two, {0.0, 0.03});
    EXPECT_DOUBLE_EQ(w.weights[0], 0.25);
    EXPECT_DOUBLE_EQ(w.weights[1], 0.75);

    auto three = NoisePool::uniform({default_training_families(false)[0],
                                     default_training_families(false)[1],
                                     default_training_families(false)[2]});
    w = reweight_pool(three, {0.5, 0.3, 0.2});
    EXPECT_DOUBLE_EQ(w.weights[0], 0.5);
    EXPECT_DOUBLE_EQ(w.weights[1], 0.3);
    EXPECT_DOUBLE_EQ(w.weights[2], 0.2);

    EXPECT_THROW(reweight_pool(two, {0.5}), std::invalid_argument);
    EXPECT_THROW(reweight_pool(two, {0.5, 1.5}), std::invalid_argument);
}

TEST(NoisePool, ReweightProperties) {
    Rng rng(31);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = int(rng.uniform_int(2, 8));
        std::vector<NoiseFamily> fams(static_cast<std::size_t>(n));
        std::vector<double> e(static_cast<std::size_t>(n));
        for (auto& v : e) v = rng.uniform();
        auto pool = NoisePool::uniform(fams);
        const auto out = reweight_pool(pool, e);

        double sum = 0.0, denom = 0.0;
        for (double v : e) denom += std::max(v, pool.floor);
        for (std::size_t i = 0; i < e.size(); ++i) {
            sum += out.weights[i];
            // exact reweighting rule
            EXPECT_DOUBLE_EQ(out.weights[i], std::max(e[i], pool.floor) / denom);
            // floor property: no family ever reaches zero
            EXPECT_GE(out.weights[i], pool.floor / denom);
            EXPECT_GT(out.weights[i], 0.0);
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        // monotone: larger error -> no smaller weight
        for (std::size_t i = 0; i < e.size(); ++i)
            for (std::size_t j = 0; j < e.size(); ++j)
                if (e[i] > e[j]) EXPECT_GE(out.weights[i] + 1e-15, out.weights[j]);
    }

    // worst-case floor constant: one family at error 1, the rest at/below
    // the floor -> min weight is exactly 0.01 / (0.01*(n-1) + 1)
    for (int n : {2, 4, 8}) {
        std::vector<NoiseFamily> fams(static_cast<std::size_t>(n));
        std::vector<double> e(std::size_t(n), 0.0);
        e[0] = 1.0;
        const auto out = reweight_pool(NoisePool::uniform(fams), e);
        const double bound = 0.01 / (0.01 * double(n - 1) + 1.0);
        for (int i = 1; i < n; ++i) EXPECT_NEAR(out.weights[std::size_t(i)], bound, 1e-12);
    }
}

TEST(NoisePool, SampleDistortion) {
    auto single = NoisePool::uniform({default_training_families(false)[5]}); // jpeg
    for (int i = 0; i < 20; ++i) {
        const auto spec = sample_distortion(single, std::uint64_t(i));
        EXPECT_EQ(spec.kind, DistortionKind::Jpeg);
        const double q = spec.param("quality");
        EXPECT_GE(q, 50.0);
        EXPECT_LE(q, 80.0);
        EXPECT_DOUBLE_EQ(q, std::round(q));
    }
    // fixed seed -> identical spec
    auto pool = NoisePool::uniform(default_training_families(false));
    const auto a = sample_distortion(pool, 99);
    const auto b = sample_distortion(pool, 99);
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.seed, b.seed);
}

TEST(NoisePool, SampleFrequencies) {
    std::vector<NoiseFamily> fams = {default_training_families(false)[0],
                                     default_training_families(false)[6]};
    NoisePool pool = NoisePool::uniform(fams);
    pool.weights = {0.25, 0.75};
    int count0 = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        if (sample_distortion(pool, std::uint64_t(i)).kind == DistortionKind::Identity) ++count0;
    EXPECT_NEAR(double(count0) / draws, 0.25, 0.01);
}

// ---- Random warp ---------------------------------------------------------

TEST(RandomWarp, SigmaZeroIsIdentity) {
    const Image img = random_image(48, 40, 1);
    WarpSpec spec;
    spec.sigma = 0.0;
    spec.scale = 0.015;
    spec.seed = 3;
    const Image out = random_warp(img, spec);
    EXPECT_LE(max_abs_diff(out, img), 1e-5);
}

TEST(RandomWarp, SeededDeterminism) {
    const Image img = random_image(32, 32, 2);
    WarpSpec spec;
    spec.sigma = 2.0;
    spec.scale = 0.01;
    spec.grid_size = 8;
    spec.seed = 77;
    EXPECT_EQ(max_abs_diff(random_warp(img, spec), random_warp(img, spec)), 0.0);
    spec.seed = 78;
    EXPECT_GT(max_abs_diff(random_warp(img, WarpSpec{2.0, 0.01, 8, 77}), random_warp(img, spec)),
              0.0);
}

TEST(RandomWarp, MatchesScalarLoopReference) {
    const Image img = ramp_image(64, 64);
    WarpSpec spec;
    spec.sigma = 2.0;
    spec.scale = 0.01;
    spec.grid_size = 8;
    spec.seed = 5;
    const Image got = random_warp(img, spec);
    const Image want = i2vwm::testing::warp_reference(img, spec);
    EXPECT_LE(max_abs_diff(got, want), 1e-4);
}

TEST(RandomWarp, DisplacementBound) {
    WarpSpec spec;
    spec.sigma = 3.0;
    spec.scale = 0.02;
    spec.grid_size = 8;
    spec.seed = 9;
    const int h = 48, w = 64;
    const auto dense = warp_displacement(spec, h, w);
    float dmax = 0.0f;
    for (float v : dense) dmax = std::max(dmax, std::fabs(v));
    const auto grid = warp_grid(spec, h, w);
    // max pixel displacement implied by the grid never exceeds
    // scale * max|disp| * (extent-1)/2
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const float gx = grid[(std::size_t(u) * w + v) * 2 + 0];
            const float gy = grid[(std::size_t(u) * w + v) * 2 + 1];
            const float px = (gx + 1.0f) * 0.5f * float(w - 1);
            const float py = (gy + 1.0f) * 0.5f * float(h - 1);
            EXPECT_LE(std::fabs(px - float(v)), spec.scale * dmax * float(w - 1) / 2.0f + 1e-3f);
            EXPECT_LE(std::fabs(py - float(u)), spec.scale * dmax * float(h - 1) / 2.0f + 1e-3f);
        }
    EXPECT_THROW((WarpSpec{-1.0, 0.01, 8, 0}).validate(), std::invalid_argument);
    EXPECT_THROW((WarpSpec{1.0, 0.01, 1, 0}).validate(), std::invalid_argument);
}

// ---- Evaluation-path distortions -----------------------------------------

TEST(ApplyDistortion, IdentityAndClipRules) {
    const Image img = random_image(32, 32, 7);
    EXPECT_EQ(max_abs_diff(apply_distortion(img, make_spec(DistortionKind::Identity), 1), img), 0.0);

    Image gray(24, 24, 3);
    for (auto& v : gray.px) v = 0.6f;
    const Image bright =
        apply_distortion(gray, make_spec(DistortionKind::Brightness, {{"factor", 2.0}}), 1);
    for (auto v : bright.px) EXPECT_FLOAT_EQ(v, 1.0f);

    EXPECT_THROW(
        apply_distortion(img, make_spec(DistortionKind::Brightness, {{"factor", 3.0}}), 1),
        std::invalid_argument);
    EXPECT_THROW(apply_distortion(img, make_spec(DistortionKind::Jpeg, {{"quality", 10.0}}), 1),
                 std::invalid_argument);
}

TEST(ApplyDistortion, JpegMatchesReferenceCodecBitForBit) {
    const Image img = random_image(40, 56, 8);
    for (int q : {50, 70, 80}) {
        const Image got =
            apply_distortion(img, make_spec(DistortionKind::Jpeg, {{"quality", double(q)}}), 1);
        const Image want = i2vwm::testing::jpeg_roundtrip_reference(img, q);
        ASSERT_EQ(got.h, want.h);
        EXPECT_EQ(max_abs_diff(got, want), 0.0) << "quality " << q;
    }
}

TEST(ApplyDistortion, CropSemantics) {
    const Image img = random_image(40, 40, 9, 0.2f, 1.0f);
    const auto spec = make_spec(DistortionKind::Crop, {{"ratio", 0.5}});
    const Image out = apply_distortion(img, spec, 42);
    EXPECT_EQ(out.h, img.h);
    // exactly the retained window keeps its original values, rest is zero
    int zeros = 0, kept = 0;
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            if (out.at(y, x, 0) == 0.0f && out.at(y, x, 1) == 0.0f && out.at(y, x, 2) == 0.0f)
                ++zeros;
            else {
                EXPECT_FLOAT_EQ(out.at(y, x, 0), img.at(y, x, 0));
                ++kept;
            }
        }
    const double ratio = double(kept) / double(out.h * out.w);
    EXPECT_NEAR(ratio, 0.5, 0.05);
    EXPECT_GT(zeros, 0);

    const Image real = apply_distortion(img, make_spec(DistortionKind::RealCrop, {{"ratio", 0.5}}), 42);
    EXPECT_LT(real.h, img.h);
    EXPECT_NEAR(double(real.h * real.w) / double(img.h * img.w), 0.5, 0.06);
}

TEST(ApplyDistortion, DropoutResizeGrayscale) {
    const Image img = random_image(32, 32, 10, 0.3f, 1.0f);
    const Image drop =
        apply_distortion(img, make_spec(DistortionKind::Dropout, {{"fraction", 0.3}}), 5);
    int zeroed = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            if (drop.at(y, x, 0) == 0.0f && drop.at(y, x, 1) == 0.0f) ++zeroed;
    EXPECT_NEAR(double(zeroed) / (32.0 * 32.0), 0.3, 0.07);

    const Image rs = apply_distortion(img, make_spec(DistortionKind::Resize, {{"factor", 0.3}}), 5);
    EXPECT_EQ(rs.h, img.h);
    EXPECT_EQ(rs.w, img.w);

    const Image gs = apply_distortion(img, make_spec(DistortionKind::Grayscale), 5);
    for (int y = 0; y < gs.h; ++y)
        for (int x = 0; x < gs.w; ++x) {
            EXPECT_FLOAT_EQ(gs.at(y, x, 0), gs.at(y, x, 1));
            EXPECT_FLOAT_EQ(gs.at(y, x, 1), gs.at(y, x, 2));
        }
}

TEST(ApplyDistortion, RangePreservation) {
    const Image img = random_image(32, 32, 11);
    Rng rng(12);
    auto pool = NoisePool::uniform(default_training_families(false));
    for (int i = 0; i < 30; ++i) {
        const auto spec = sample_distortion(pool, std::uint64_t(i));
        const Image out = apply_distortion(img, spec, std::uint64_t(1000 + i));
        for (auto v : out.px) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
        if (spec.kind != DistortionKind::RealCrop) {
            EXPECT_EQ(out.h, img.h);
            EXPECT_EQ(out.w, img.w);
        }
    }
}

TEST(Autoencoder, IdentityBackend) {
    const Image img = random_image(32, 32, 13);
    IdentityAutoencoder id;
    EXPECT_EQ(max_abs_diff(autoencoder_roundtrip(img, &id), img), 0.0);
    EXPECT_THROW(autoencoder_roundtrip(img, nullptr), std::runtime_error);
    EXPECT_THROW(make_autoencoder("pretrained"), std::runtime_error);
    EXPECT_THROW(make_autoencoder("nope"), std::runtime_error);
}

TEST(Autoencoder, TinyTrainsAndRoundTrips) {
    std::vector<Image> imgs;
    for (int i = 0; i < 8; ++i) imgs.push_back(random_image(24, 24, 100 + std::uint64_t(i)));
    TinyAutoencoder ae(8, 3);
    const double mse_after = ae.train(imgs, 30, 4, 2e-3f, 7);
    EXPECT_TRUE(std::isfinite(mse_after));
    const Image out = ae.roundtrip(imgs[0]);
    EXPECT_EQ(out.h, 24);
    EXPECT_EQ(out.w, 24);
    // desk-tier informational: reconstruction should beat a mid-gray baseline
    Image gray(24, 24, 3);
    for (auto& v : gray.px) v = 0.5f;
    EXPECT_LT(mean_abs_diff(out, imgs[0]), mean_abs_diff(gray, imgs[0]) * 1.5);

    // weights round-trip through the archive
    const auto dir = std::filesystem::temp_directory_path() / "i2vwm_ae_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "ae.bin").string();
    ae.save(path);
    auto loaded = TinyAutoencoder::load(path);
    EXPECT_EQ(max_abs_diff(loaded->roundtrip(imgs[0]), out), 0.0);
    std::filesystem::remove_all(dir);
}

// ---- Training-path (differentiable) distortions ---------------------------

namespace {

double noise_layer_grad_error(DistortionKind kind, std::map<std::string, double> params,
                              std::uint64_t seed, const AutoencoderBackend* ae = nullptr) {
    Rng rng(seed);
    Tensor x({2, 3, 16, 16});
    for (auto& v : x.vec()) v = 0.35f + 0.3f * rng.uniform_float();
    DistortionSpec spec;
    spec.kind = kind;
    spec.params = std::move(params);
    auto out = apply_noise_layer(x, spec, seed + 1, ae);
    const Tensor w = i2vwm::testing::random_weights(out.value.shape(), seed + 2);
    const Tensor gx = out.backward(w);
    auto loss = [&](const Tensor& xin) {
        auto o = apply_noise_layer(xin, spec, seed + 1, ae);
        return i2vwm::testing::weighted_sum(o.value, w);
    };
    return i2vwm::testing::finite_difference_error(loss, x, gx, 30, seed + 3, 1e-2);
}

} // namespace

TEST(NoiseLayer, DifferentiableFamiliesMatchFiniteDifferences) {
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Identity, {}, 100), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::GaussianNoise, {{"sigma", 0.02}}, 200), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Brightness, {{"factor", 1.2}}, 300), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Contrast, {{"factor", 0.8}}, 400), 2e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Saturation, {{"factor", 0.7}}, 500), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Grayscale, {}, 600), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Dropout, {{"fraction", 0.4}}, 700), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Crop, {{"ratio", 0.6}}, 800), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::RealCrop, {{"ratio", 0.6}}, 900), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::Resize, {{"factor", 0.5}}, 1000), 1e-2);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::GaussianBlur, {{"sigma", 1.0}}, 1100), 1e-2);
    EXPECT_LT(noise_layer_grad_error(
                  DistortionKind::RandomWarp,
                  {{"sigma", 1.0}, {"scale", 0.01}, {"grid_size", 4.0}}, 1200),
              1e-2);
    TinyAutoencoder ae(8, 5);
    EXPECT_LT(noise_layer_grad_error(DistortionKind::AutoencoderRoundtrip, {}, 1300, &ae), 1e-2);
}

TEST(NoiseLayer, ForwardMatchesSemantics) {
    Rng rng(41);
    Tensor x({2, 3, 16, 16});
    for (auto& v : x.vec()) v = rng.uniform_float();

    DistortionSpec id;
    id.kind = DistortionKind::Identity;
    auto out = apply_noise_layer(x, id, 1);
    EXPECT_EQ((out.value - x).max_abs(), 0.0f);

    DistortionSpec jp;
    jp.kind = DistortionKind::Jpeg;
    jp.params["quality"] = 50.0;
    auto jout = apply_noise_layer(x, jp, 1);
    EXPECT_GT((jout.value - x).max_abs(), 0.0f);
    for (auto v : jout.value.vec()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
    // straight-through: gradient passes unchanged
    Tensor g = Tensor::full(x.shape(), 0.5f);
    EXPECT_EQ((jout.backward(g) - g).max_abs(), 0.0f);
}
