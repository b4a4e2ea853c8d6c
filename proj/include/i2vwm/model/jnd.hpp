#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "i2vwm/core/image.hpp"

namespace i2vwm {

// Chou-Li spatial JND profile: luminance adaptation plus texture masking,
// computed from the luma plane in the 0..255 domain and returned in [0,1]
// intensity units. The map depends only on the luminance of the input.
namespace jnd_detail {

// 5x5 weighted background-luminance kernel, weights sum to 32.
inline const int kBackground[5][5] = {
    {1, 1, 1, 1, 1}, {1, 2, 2, 2, 1}, {1, 2, 0, 2, 1}, {1, 2, 2, 2, 1}, {1, 1, 1, 1, 1}};

// Four directional gradient operators (divisor 16).
inline const int kGrad[4][5][5] = {
    {{0, 0, 0, 0, 0}, {1, 3, 8, 3, 1}, {0, 0, 0, 0, 0}, {-1, -3, -8, -3, -1}, {0, 0, 0, 0, 0}},
    {{0, 0, 1, 0, 0}, {0, 8, 3, 0, 0}, {1, 3, 0, -3, -1}, {0, 0, -3, -8, 0}, {0, 0, -1, 0, 0}},
    {{0, 0, 1, 0, 0}, {0, 0, 3, 8, 0}, {-1, -3, 0, 3, 1}, {0, -8, -3, 0, 0}, {0, 0, -1, 0, 0}},
    {{0, 1, 0, -1, 0}, {0, 3, 0, -3, 0}, {0, 8, 0, -8, 0}, {0, 3, 0, -3, 0}, {0, 1, 0, -1, 0}}};

// Visibility threshold due to background luminance alone (0..255 domain).
inline double luminance_threshold(double bg) {
    if (bg <= 127.0) return 17.0 * (1.0 - std::sqrt(bg / 127.0)) + 3.0;
    return (3.0 / 128.0) * (bg - 127.0) + 3.0;
}

// Texture-masking threshold given background and maximal gradient.
inline double texture_threshold(double bg, double mg) {
    const double alpha = bg * 0.0001 + 0.115;
    const double beta = 0.5 - bg * 0.01;
    return mg * alpha + beta;
}

} // namespace jnd_detail

// Per-pixel perceptual threshold map (H x W, single channel, nonnegative).
inline Image jnd_map(const Image& img) {
    check_image(img, "jnd_map");
    const int h = img.h, w = img.w;

    std::vector<float> y255(std::size_t(h) * w);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
            y255[std::size_t(yy) * w + xx] = float(std::round(255.0 * luma_at(img, yy, xx)));

    auto sample = [&](int yy, int xx) {
        yy = std::clamp(yy, 0, h - 1);
        xx = std::clamp(xx, 0, w - 1);
        return double(y255[std::size_t(yy) * w + xx]);
    };

    Image out(h, w, 1);
    for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
            double bg = 0.0;
            double grad[4] = {0, 0, 0, 0};
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    const double v = sample(yy + i - 2, xx + j - 2);
                    bg += v * jnd_detail::kBackground[i][j];
                    for (int k = 0; k < 4; ++k) grad[k] += v * jnd_detail::kGrad[k][i][j];
                }
            bg /= 32.0;
            double mg = 0.0;
            for (int k = 0; k < 4; ++k) mg = std::max(mg, std::fabs(grad[k]) / 16.0);
            const double t =
                std::max(jnd_detail::texture_threshold(bg, mg), jnd_detail::luminance_threshold(bg));
            out.at(yy, xx, 0) = float(t / 255.0);
        }
    }
    return out;
}

// Residual clamp: JND(r) = sign(r) * min(|r|, T) elementwise.
inline float jnd_clamp(float r, float t) {
    const float m = std::min(std::fabs(r), t);
    return r < 0.0f ? -m : m;
}

// I_E = clip(I_o + lambda * JND(W_I - I_o)); the watermark residual never
// exceeds lambda * T(I_o) pointwise.
inline Image fuse_jnd(const Image& original, const Image& watermark_image, double lambda) {
    if (!original.same_shape(watermark_image))
        throw std::invalid_argument("fuse_jnd: image shapes must match");
    if (lambda < 0.0) throw std::invalid_argument("fuse_jnd: lambda must be nonnegative");
    check_image(original, "fuse_jnd");
    if (lambda == 0.0) return original;

    const Image t = jnd_map(original);
    Image out(original.h, original.w, original.c);
    for (int y = 0; y < original.h; ++y)
        for (int x = 0; x < original.w; ++x) {
            const float tt = t.at(y, x, 0);
            for (int ch = 0; ch < original.c; ++ch) {
                const float r = watermark_image.at(y, x, ch) - original.at(y, x, ch);
                out.at(y, x, ch) =
                    clampf(original.at(y, x, ch) + float(lambda) * jnd_clamp(r, tt), 0.0f, 1.0f);
            }
        }
    return out;
}

} // namespace i2vwm
