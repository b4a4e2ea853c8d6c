#include <gtest/gtest.h>

#include "i2vwm/core/rng.hpp"
#include "i2vwm/metrics/accuracy.hpp"
#include "i2vwm/metrics/quality.hpp"

#include "loop_oracles.hpp"

using namespace i2vwm;

namespace {

WatermarkMessage msg_from(const std::string& bits) {
    std::vector<std::uint8_t> b;
    for (char c : bits) b.push_back(c == '1' ? 1 : 0);
    return WatermarkMessage(b);
}

} // namespace

TEST(BitAccuracy, HandCases) {
    EXPECT_DOUBLE_EQ(bit_accuracy(msg_from("1010"), msg_from("1010")), 1.0);
    EXPECT_DOUBLE_EQ(bit_accuracy(msg_from("1010"), msg_from("0101")), 0.0);
    EXPECT_DOUBLE_EQ(bit_accuracy(msg_from("1010"), msg_from("1000")), 0.75);
    EXPECT_THROW(bit_accuracy(msg_from("10"), msg_from("100")), std::invalid_argument);
}

TEST(BitAccuracy, SymmetryAndIdentity) {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto a = WatermarkMessage::random(32, rng);
        const auto b = WatermarkMessage::random(32, rng);
        EXPECT_DOUBLE_EQ(bit_accuracy(a, b), bit_accuracy(b, a));
        EXPECT_DOUBLE_EQ(bit_accuracy(a, a), 1.0);
    }
}

TEST(AccuracyMatrix, Validation) {
    EXPECT_THROW(AccuracyMatrix({{0.5, 0.5}, {0.5}}), std::invalid_argument);
    EXPECT_THROW(AccuracyMatrix({{0.5, 1.5}}), std::invalid_argument);
    EXPECT_THROW(AccuracyMatrix(std::vector<std::vector<double>>{}), std::invalid_argument);
    AccuracyMatrix m(2, 3);
    EXPECT_THROW(m.set(0, 0, -0.1), std::invalid_argument);
}

TEST(Facc, HandAndOracle) {
    const AccuracyMatrix m({{1.0, 0.9}, {1.0, 0.7}});
    const auto facc = frame_accuracy_curve(m);
    ASSERT_EQ(facc.size(), 2u);
    EXPECT_DOUBLE_EQ(facc[0], 1.0);
    EXPECT_DOUBLE_EQ(facc[1], 0.8);

    const AccuracyMatrix single({{0.3, 0.6, 0.9}});
    EXPECT_EQ(frame_accuracy_curve(single), (std::vector<double>{0.3, 0.6, 0.9}));

    Rng rng(11);
    std::vector<std::vector<double>> rows(50, std::vector<double>(100));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform();
    const auto got = frame_accuracy_curve(AccuracyMatrix(rows));
    const auto want = i2vwm::testing::column_means_loop(rows);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_DOUBLE_EQ(got[i], want[i]);
}

TEST(Rdd, HandCases) {
    EXPECT_EQ(robust_diffusion_distance({0.99, 0.95, 0.89, 0.92}, 0.9), 2);
    EXPECT_EQ(robust_diffusion_distance({0.5, 0.99, 0.99}, 0.9), 0);
    const std::vector<double> allpass(120, 0.95);
    EXPECT_EQ(robust_diffusion_distance(allpass, 0.9), 120);
    EXPECT_THROW(robust_diffusion_distance({0.5}, 1.5), std::invalid_argument);
}

TEST(Rdd, Properties) {
    Rng rng(13);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> facc(std::size_t(rng.uniform_int(1, 40)));
        for (auto& v : facc) v = rng.uniform();
        const double t1 = rng.uniform(0.05, 0.95);
        const double t2 = rng.uniform(t1, 0.95);
        // monotone in tau
        EXPECT_GE(robust_diffusion_distance(facc, t1), robust_diffusion_distance(facc, t2));
        // brute-force leading-run count
        int expect = 0;
        for (double v : facc) {
            if (v < t1) break;
            ++expect;
        }
        EXPECT_EQ(robust_diffusion_distance(facc, t1), expect);
    }
    // appending a passing frame to an all-passing curve increments by one
    std::vector<double> curve(10, 0.95);
    const int before = robust_diffusion_distance(curve, 0.9);
    curve.push_back(0.93);
    EXPECT_EQ(robust_diffusion_distance(curve, 0.9), before + 1);
}

TEST(Vacc, HandAndOracle) {
    EXPECT_DOUBLE_EQ(video_accuracy(AccuracyMatrix({{1.0, 1.0}, {1.0, 1.0}})), 1.0);
    EXPECT_DOUBLE_EQ(video_accuracy(AccuracyMatrix({{1.0, 0.9}, {1.0, 0.7}})), 0.9);

    Rng rng(17);
    std::vector<std::vector<double>> rows(20, std::vector<double>(30));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform();
    const AccuracyMatrix m(rows);
    EXPECT_NEAR(video_accuracy(m), i2vwm::testing::grand_mean_loop(rows), 1e-12);

    // VACC equals the mean of FACC for rectangular matrices
    const auto facc = frame_accuracy_curve(m);
    double mean = 0.0;
    for (double v : facc) mean += v;
    mean /= double(facc.size());
    EXPECT_NEAR(video_accuracy(m), mean, 1e-12);
}

TEST(Psnr, AnalyticCases) {
    Image a(20, 20, 3), b(20, 20, 3);
    for (auto& v : a.px) v = 0.5f;
    for (auto& v : b.px) v = 0.6f;
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-4);
    EXPECT_DOUBLE_EQ(psnr(a, a), 100.0);
    EXPECT_THROW(psnr(a, Image(10, 20, 3)), std::invalid_argument);

    // strictly decreasing in MSE
    Image c = a;
    for (auto& v : c.px) v = 0.7f;
    EXPECT_LT(psnr(a, c), psnr(a, b));
}

TEST(Ssim, IdentityAndDegradation) {
    Rng rng(23);
    Image a(32, 32, 3);
    for (auto& v : a.px) v = rng.uniform_float();
    EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);

    Image noisy1 = a, noisy2 = a;
    Rng nrng(24);
    for (auto& v : noisy1.px) v = clampf(v + float(nrng.normal(0.0, 0.02)), 0.0f, 1.0f);
    for (auto& v : noisy2.px) v = clampf(v + float(nrng.normal(0.0, 0.2)), 0.0f, 1.0f);
    const double s1 = ssim(a, noisy1);
    const double s2 = ssim(a, noisy2);
    EXPECT_GT(s1, s2);
    EXPECT_GE(s1, -1.0);
    EXPECT_LE(s1, 1.0);
    EXPECT_THROW(ssim(a, Image(16, 16, 3)), std::invalid_argument);
}
