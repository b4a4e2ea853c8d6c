#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "i2vwm/infer/embed.hpp"
#include "i2vwm/infer/flow.hpp"
#include "i2vwm/infer/video.hpp"

#include "loop_oracles.hpp"

using namespace i2vwm;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.native_resolution = 32;
    cfg.message_length = 16;
    cfg.mapper_channels = 4;
    cfg.encoder_base_channels = 4;
    cfg.encoder_blocks = 1;
    cfg.decoder_widths = {8, 16};
    cfg.decoder_depths = {1, 1};
    cfg.decoder_mlp_hidden = 32;
    cfg.discriminator_base_channels = 4;
    return cfg;
}

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, 3);
    for (auto& v : img.px) v = rng.uniform_float();
    return img;
}

// smooth multi-octave texture, good for optical flow
Image textured_image(int h, int w, std::uint64_t seed) {
    Image out(h, w, 3);
    Rng rng(seed);
    for (int octave = 0; octave < 3; ++octave) {
        const int g = 6 << octave;
        std::vector<float> base(std::size_t(g) * g);
        for (auto& v : base) v = rng.uniform_float();
        std::vector<float> dense(std::size_t(h) * w);
        bicubic_resample(base.data(), g, g, 1, dense.data(), h, w);
        const float amp = 0.5f / float(1 << octave);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, x, c) += amp * dense[std::size_t(y) * w + x];
    }
    out.clip01();
    return out;
}

WatermarkMessage msg_from(const std::string& bits) {
    std::vector<std::uint8_t> b;
    for (char c : bits) b.push_back(c == '1' ? 1 : 0);
    return WatermarkMessage(b);
}

} // namespace

// ---- embedding -----------------------------------------------------------

TEST(Embed, AlphaZeroIsIdentity) {
    WatermarkModel model(tiny_config(), 3);
    const Image img = random_image(80, 64, 1);
    Rng rng(2);
    EmbedParams p;
    p.alpha = 0.0;
    const Image out = embed_any_resolution(img, WatermarkMessage::random(16, rng), p, model);
    EXPECT_EQ(max_abs_diff(out, img), 0.0);
}

TEST(Embed, NativeResolutionAlphaOneEqualsFusePath) {
    WatermarkModel model(tiny_config(), 3);
    const Image img = random_image(32, 32, 4);
    Rng rng(5);
    const auto msg = WatermarkMessage::random(16, rng);
    EmbedParams p;

    const Image via_embed = embed_any_resolution(img, msg, p, model);
    const Image direct =
        fuse_jnd(img, model.encode_watermark(img, model.map_message(msg)), p.jnd_lambda);
    EXPECT_LE(max_abs_diff(via_embed, direct), 1e-6);
}

TEST(Embed, AnyResolutionComposeByHandOracle) {
    WatermarkModel model(tiny_config(), 3);
    const Image img = random_image(96, 72, 6);
    Rng rng(7);
    const auto msg = WatermarkMessage::random(16, rng);
    EmbedParams p;
    p.alpha = 0.7;

    const Image got = embed_any_resolution(img, msg, p, model);
    EXPECT_EQ(got.h, 96);
    EXPECT_EQ(got.w, 72);

    // standalone two-step recomputation
    const Image low = resize_bilinear(img, 32, 32);
    const Image fused = fuse_jnd(low, model.encode_watermark(low, model.map_message(msg)), p.jnd_lambda);
    Image res(32, 32, 3);
    for (std::size_t i = 0; i < res.px.size(); ++i) res.px[i] = fused.px[i] - low.px[i];
    const Image res_up = resize_bilinear(res, 96, 72);
    Image want = img;
    for (std::size_t i = 0; i < want.px.size(); ++i)
        want.px[i] = clampf(img.px[i] + float(p.alpha) * res_up.px[i], 0.0f, 1.0f);
    EXPECT_LE(max_abs_diff(got, want), 1e-6);

    EXPECT_THROW(embed_any_resolution(img, WatermarkMessage::random(8, rng), p, model),
                 std::invalid_argument);
}

TEST(Embed, ResidualScalesLinearlyInAlphaPreClip) {
    WatermarkModel model(tiny_config(), 3);
    const Image img = random_image(48, 48, 8);
    Rng rng(9);
    const auto msg = WatermarkMessage::random(16, rng);
    EmbedParams p;
    const auto res = watermark_residual(img, msg, p, model);

    for (double alpha : {0.25, 0.5, 1.0, 2.0}) {
        EmbedParams pa = p;
        pa.alpha = alpha;
        const Image out = embed_any_resolution(img, msg, pa, model);
        for (std::size_t i = 0; i < img.px.size(); ++i) {
            const float expect = img.px[i] + float(alpha) * res[i];
            if (expect > 0.0f && expect < 1.0f)
                EXPECT_NEAR(out.px[i], expect, 1e-6f);
            else
                EXPECT_NEAR(out.px[i], clampf(expect, 0.0f, 1.0f), 1e-6f);
        }
    }
}

TEST(Embed, ExtractAcceptsAnyResolution) {
    WatermarkModel model(tiny_config(), 3);
    const Image img = random_image(100, 100, 10);
    const auto msg = extract_from_image(img, model);
    EXPECT_EQ(msg.size(), 16u);
    EXPECT_EQ(extract_from_image(img, model), msg);
}

// ---- optical flow ---------------------------------------------------------

TEST(Flow, IdenticalFramesGiveZeroMotion) {
    const Image img = textured_image(96, 96, 11);
    PyramidalFlowBackend backend;
    const FlowField f = estimate_flow(img, img, backend);
    EXPECT_LE(f.mean_magnitude(), backend.zero_motion_tolerance());
}

TEST(Flow, RecoversKnownTranslation) {
    // tar is ref shifted +5 px horizontally (content moves right)
    const Image wide = textured_image(128, 170, 12);
    Image ref(128, 128, 3), tar(128, 128, 3);
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            for (int c = 0; c < 3; ++c) {
                ref.at(y, x, c) = wide.at(y, x + 21, c);
                tar.at(y, x, c) = wide.at(y, x + 16, c); // ref(y,x) == tar(y,x+5)
            }
    PyramidalFlowBackend backend;
    const FlowField f = estimate_flow(ref, tar, backend);

    std::vector<float> fxs, fys;
    for (int y = 16; y < 112; ++y)
        for (int x = 16; x < 112; ++x) {
            fxs.push_back(f.fx(y, x));
            fys.push_back(f.fy(y, x));
        }
    std::nth_element(fxs.begin(), fxs.begin() + fxs.size() / 2, fxs.end());
    std::nth_element(fys.begin(), fys.begin() + fys.size() / 2, fys.end());
    const float med_fx = fxs[fxs.size() / 2];
    const float med_fy = fys[fys.size() / 2];
    EXPECT_GE(med_fx, 4.5f);
    EXPECT_LE(med_fx, 5.5f);
    EXPECT_GE(med_fy, -0.5f);
    EXPECT_LE(med_fy, 0.5f);
}

TEST(Flow, ShapeMismatchError) {
    PyramidalFlowBackend backend;
    EXPECT_THROW(estimate_flow(textured_image(64, 64, 1), textured_image(128, 128, 2), backend),
                 std::invalid_argument);
    EXPECT_NO_THROW(make_flow_backend("classical"));
    EXPECT_THROW(make_flow_backend("recurrent"), std::runtime_error);
    EXPECT_THROW(make_flow_backend("bogus"), std::runtime_error);
}

TEST(AlignFrame, ZeroFlowIsIdentity) {
    const Image img = random_image(40, 40, 13);
    const FlowField zero(40, 40);
    EXPECT_EQ(max_abs_diff(align_frame(img, zero), img), 0.0);
    EXPECT_THROW(align_frame(img, FlowField(20, 40)), std::invalid_argument);
}

TEST(AlignFrame, InvertsKnownTranslation) {
    const Image wide = textured_image(96, 140, 14);
    Image ref(96, 96, 3), tar(96, 96, 3);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x)
            for (int c = 0; c < 3; ++c) {
                ref.at(y, x, c) = wide.at(y, x + 21, c);
                tar.at(y, x, c) = wide.at(y, x + 16, c);
            }
    FlowField f(96, 96);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) f.fx(y, x) = 5.0f;
    const Image warped = align_frame(tar, f);
    double err = 0.0;
    int count = 0;
    for (int y = 8; y < 88; ++y)
        for (int x = 8; x < 88; ++x)
            for (int c = 0; c < 3; ++c) {
                err += std::fabs(warped.at(y, x, c) - ref.at(y, x, c));
                ++count;
            }
    EXPECT_LE(err / count, 0.02);
}

TEST(AlignFrame, OutOfBoundsFlowReplicatesBorder) {
    const Image img = random_image(32, 32, 15);
    FlowField f(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            f.fx(y, x) = 1000.0f;
            f.fy(y, x) = -1000.0f;
        }
    const Image out = align_frame(img, f);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c) {
                EXPECT_TRUE(std::isfinite(out.at(y, x, c)));
                EXPECT_FLOAT_EQ(out.at(y, x, c), img.at(0, 31, c));
            }
}

TEST(Flow, EstimateAlignOnSelfIsIdentity) {
    const Image img = textured_image(96, 96, 16);
    PyramidalFlowBackend backend;
    const Image out = align_frame(img, estimate_flow(img, img, backend));
    EXPECT_LE(mean_abs_diff(out, img), 0.02);
}

// ---- majority voting -------------------------------------------------------

TEST(MajorityVote, HandCases) {
    const auto m = msg_from("1011");
    EXPECT_EQ(majority_vote({m, m, m}), m);

    // tie at N=2 resolves to 1
    EXPECT_EQ(majority_vote({msg_from("10"), msg_from("00")}), msg_from("10"));
    EXPECT_EQ(majority_vote({msg_from("1"), msg_from("0")}), msg_from("1"));

    EXPECT_THROW(majority_vote({}), std::invalid_argument);
    EXPECT_THROW(majority_vote({msg_from("10"), msg_from("100")}), std::invalid_argument);
}

TEST(MajorityVote, MatchesBruteForceOracle) {
    Rng rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = int(rng.uniform_int(1, 5));
        const int len = int(rng.uniform_int(1, 8));
        std::vector<WatermarkMessage> msgs;
        for (int i = 0; i < n; ++i) msgs.push_back(WatermarkMessage::random(len, rng));
        EXPECT_EQ(majority_vote(msgs), i2vwm::testing::vote_loop(msgs));
    }
}

TEST(MajorityVote, PermutationInvarianceAndMonotonicity) {
    Rng rng(19);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = int(rng.uniform_int(2, 5));
        std::vector<WatermarkMessage> msgs;
        for (int i = 0; i < n; ++i) msgs.push_back(WatermarkMessage::random(8, rng));
        const auto base = majority_vote(msgs);

        auto shuffled = msgs;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
        EXPECT_EQ(majority_vote(shuffled), base);

        // flip one input bit 0 -> 1: output bit never flips 1 -> 0
        const int which = int(rng.uniform_int(0, n - 1));
        const int bit = int(rng.uniform_int(0, 7));
        if (msgs[std::size_t(which)][std::size_t(bit)] == 0) {
            auto bits = msgs[std::size_t(which)].bits();
            bits[std::size_t(bit)] = 1;
            msgs[std::size_t(which)] = WatermarkMessage(bits);
            const auto flipped = majority_vote(msgs);
            if (base[std::size_t(bit)] == 1) EXPECT_EQ(flipped[std::size_t(bit)], 1);
        }
    }
}

// ---- video extraction -------------------------------------------------------

TEST(VideoExtract, SingleFrameEqualsImageExtraction) {
    WatermarkModel model(tiny_config(), 3);
    PyramidalFlowBackend backend;
    VideoSequence video;
    video.frames.push_back(random_image(64, 64, 20));
    const auto res = extract_from_video(video, model, backend, /*align=*/true);
    EXPECT_EQ(res.message, extract_from_image(video.frames[0], model));
    EXPECT_EQ(res.frames.size(), 1u);
    EXPECT_FALSE(res.frames[0].aligned);
}

TEST(VideoExtract, UnalignedModeIsComposition) {
    WatermarkModel model(tiny_config(), 3);
    PyramidalFlowBackend backend;
    VideoSequence video;
    for (int i = 0; i < 5; ++i) video.frames.push_back(random_image(48, 48, 30 + std::uint64_t(i)));

    const auto res = extract_from_video(video, model, backend, /*align=*/false);
    std::vector<WatermarkMessage> per_frame;
    for (const auto& f : video.frames) per_frame.push_back(extract_from_image(f, model));
    EXPECT_EQ(res.message, majority_vote(per_frame));
    for (std::size_t i = 0; i < per_frame.size(); ++i) {
        EXPECT_EQ(res.frames[i].message, per_frame[i]);
        EXPECT_FALSE(res.frames[i].aligned);
    }
}

TEST(VideoExtract, ValidationErrors) {
    WatermarkModel model(tiny_config(), 3);
    PyramidalFlowBackend backend;
    VideoSequence empty;
    EXPECT_THROW(extract_from_video(empty, model, backend, false), std::invalid_argument);

    VideoSequence ragged;
    ragged.frames.push_back(random_image(32, 32, 1));
    ragged.frames.push_back(random_image(48, 32, 2));
    EXPECT_THROW(extract_from_video(ragged, model, backend, false), std::invalid_argument);
}
