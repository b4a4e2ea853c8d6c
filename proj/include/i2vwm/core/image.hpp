#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/tensor.hpp"

namespace i2vwm {

// H x W x C image, interleaved (HWC), RGB, intensities nominally in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    int c = 3;
    std::vector<float> px;

    Image() = default;
    Image(int height, int width, int channels = 3)
        : h(height), w(width), c(channels), px(std::size_t(height) * width * channels, 0.0f) {
        if (height < 1 || width < 1 || (channels != 1 && channels != 3))
            throw std::invalid_argument("Image: bad dimensions");
    }

    float& at(int y, int x, int ch) { return px[(std::size_t(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return px[(std::size_t(y) * w + x) * c + ch]; }

    bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

    void clip01() {
        for (auto& v : px) v = std::min(1.0f, std::max(0.0f, v));
    }
};

// Public-API images must be at least 16x16 with values in a sane range.
inline void check_image(const Image& img, const char* what) {
    if (img.h < 16 || img.w < 16)
        throw std::invalid_argument(std::string(what) + ": image must be at least 16x16, got " +
                                    std::to_string(img.h) + "x" + std::to_string(img.w));
    if (img.c != 3 && img.c != 1)
        throw std::invalid_argument(std::string(what) + ": expected 1 or 3 channels");
}

inline float clampf(float v, float lo, float hi) { return std::min(hi, std::max(lo, v)); }

// Rec.601 luma in the same [0,1] scale as the input.
inline float luma_at(const Image& img, int y, int x) {
    if (img.c == 1) return img.at(y, x, 0);
    return 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
}

inline Image to_gray(const Image& img) {
    Image g(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) g.at(y, x, 0) = luma_at(img, y, x);
    return g;
}

// Bilinear fetch at real-valued pixel coordinates with border replication.
inline void bilinear_fetch(const Image& img, float fx, float fy, float* out) {
    const int x0 = int(std::floor(fx));
    const int y0 = int(std::floor(fy));
    const float ax = fx - float(x0);
    const float ay = fy - float(y0);
    const int x0c = std::clamp(x0, 0, img.w - 1);
    const int x1c = std::clamp(x0 + 1, 0, img.w - 1);
    const int y0c = std::clamp(y0, 0, img.h - 1);
    const int y1c = std::clamp(y0 + 1, 0, img.h - 1);
    for (int ch = 0; ch < img.c; ++ch) {
        const float v00 = img.at(y0c, x0c, ch);
        const float v01 = img.at(y0c, x1c, ch);
        const float v10 = img.at(y1c, x0c, ch);
        const float v11 = img.at(y1c, x1c, ch);
        out[ch] = (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
    }
}

// Bilinear resize with half-pixel centers.
inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad target size");
    if (out_h == src.h && out_w == src.w) return src;
    Image dst(out_h, out_w, src.c);
    const float sy = float(src.h) / float(out_h);
    const float sx = float(src.w) / float(out_w);
    std::vector<float> tmp(std::size_t(src.c));
    for (int y = 0; y < out_h; ++y) {
        const float fy = (float(y) + 0.5f) * sy - 0.5f;
        for (int x = 0; x < out_w; ++x) {
            const float fx = (float(x) + 0.5f) * sx - 0.5f;
            bilinear_fetch(src, fx, fy, tmp.data());
            for (int ch = 0; ch < src.c; ++ch) dst.at(y, x, ch) = tmp[ch];
        }
    }
    return dst;
}

// Keys cubic kernel, a = -0.75 (the common convolutional bicubic).
inline float cubic_weight(float t) {
    constexpr float a = -0.75f;
    t = std::fabs(t);
    if (t <= 1.0f) return ((a + 2.0f) * t - (a + 3.0f)) * t * t + 1.0f;
    if (t < 2.0f) return (((t - 5.0f) * t + 8.0f) * t - 4.0f) * a;
    return 0.0f;
}

// Generic bicubic resampler over a row-major field with `comp` components
// per sample. Used for images and for displacement-field upsampling.
inline void bicubic_resample(const float* src, int src_h, int src_w, int comp, float* dst,
                             int out_h, int out_w) {
    const float sy = float(src_h) / float(out_h);
    const float sx = float(src_w) / float(out_w);
    for (int y = 0; y < out_h; ++y) {
        const float fy = (float(y) + 0.5f) * sy - 0.5f;
        const int y0 = int(std::floor(fy)) - 1;
        float wy[4];
        for (int i = 0; i < 4; ++i) wy[i] = cubic_weight(fy - float(y0 + i));
        for (int x = 0; x < out_w; ++x) {
            const float fx = (float(x) + 0.5f) * sx - 0.5f;
            const int x0 = int(std::floor(fx)) - 1;
            float wx[4];
            for (int i = 0; i < 4; ++i) wx[i] = cubic_weight(fx - float(x0 + i));
            for (int ch = 0; ch < comp; ++ch) {
                float acc = 0.0f;
                for (int i = 0; i < 4; ++i) {
                    const int yy = std::clamp(y0 + i, 0, src_h - 1);
                    float row = 0.0f;
                    for (int j = 0; j < 4; ++j) {
                        const int xx = std::clamp(x0 + j, 0, src_w - 1);
                        row += wx[j] * src[(std::size_t(yy) * src_w + xx) * comp + ch];
                    }
                    acc += wy[i] * row;
                }
                dst[(std::size_t(y) * out_w + x) * comp + ch] = acc;
            }
        }
    }
}

inline Image resize_bicubic(const Image& src, int out_h, int out_w) {
    if (out_h == src.h && out_w == src.w) return src;
    Image dst(out_h, out_w, src.c);
    bicubic_resample(src.px.data(), src.h, src.w, src.c, dst.px.data(), out_h, out_w);
    return dst;
}

// Image (HWC) -> network tensor (1,C,H,W)
inline Tensor image_to_tensor(const Image& img) {
    Tensor t({1, img.c, img.h, img.w});
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) t.at4(0, ch, y, x) = img.at(y, x, ch);
    return t;
}

// Batch of same-shape images -> (N,C,H,W)
inline Tensor images_to_tensor(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int h = imgs[0].h, w = imgs[0].w, c = imgs[0].c;
    Tensor t({std::int64_t(imgs.size()), c, h, w});
    for (std::size_t n = 0; n < imgs.size(); ++n) {
        if (imgs[n].h != h || imgs[n].w != w || imgs[n].c != c)
            throw std::invalid_argument("images_to_tensor: ragged batch");
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) t.at4(std::int64_t(n), ch, y, x) = imgs[n].at(y, x, ch);
    }
    return t;
}

inline Image tensor_to_image(const Tensor& t, std::int64_t n = 0) {
    if (t.ndim() != 4) throw std::invalid_argument("tensor_to_image: expected NCHW");
    Image img(int(t.dim(2)), int(t.dim(3)), int(t.dim(1)));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) img.at(y, x, ch) = t.at4(n, ch, y, x);
    return img;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) acc += std::fabs(a.px[i] - b.px[i]);
    return a.px.empty() ? 0.0 : acc / double(a.px.size());
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) m = std::max(m, double(std::fabs(a.px[i] - b.px[i])));
    return m;
}

} // namespace i2vwm
