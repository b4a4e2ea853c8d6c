#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/core/imageio.hpp"
#include "i2vwm/core/rng.hpp"
#include "i2vwm/distortion/autoencoder.hpp"
#include "i2vwm/distortion/spec.hpp"
#include "i2vwm/distortion/warp.hpp"

namespace i2vwm {

namespace distort_detail {

inline std::vector<float> gaussian_kernel(double sigma) {
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> k(std::size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-double(i) * i / (2.0 * sigma * sigma));
        k[std::size_t(i + radius)] = float(v);
        sum += v;
    }
    for (auto& v : k) v = float(v / sum);
    return k;
}

struct CropWindow {
    int top, left, height, width;
};

// Retained window covering `ratio` of the canvas area, placed uniformly at
// random.
inline CropWindow crop_window(Rng& rng, int h, int w, double ratio) {
    const double side = std::sqrt(ratio);
    const int wh = std::max(1, int(std::lround(h * side)));
    const int ww = std::max(1, int(std::lround(w * side)));
    const int top = int(rng.uniform_int(0, h - wh));
    const int left = int(rng.uniform_int(0, w - ww));
    return {top, left, wh, ww};
}

inline double mean_luma(const Image& img) {
    double acc = 0.0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) acc += luma_at(img, y, x);
    return acc / (double(img.h) * img.w);
}

} // namespace distort_detail

inline Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const auto k = distort_detail::gaussian_kernel(sigma);
    const int radius = int(k.size()) / 2;
    Image tmp(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[std::size_t(i + radius)] *
                           img.at(y, std::clamp(x + i, 0, img.w - 1), c);
                tmp.at(y, x, c) = acc;
            }
    Image out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < img.c; ++c) {
                float acc = 0.0f;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[std::size_t(i + radius)] *
                           tmp.at(std::clamp(y + i, 0, img.h - 1), x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

// Roundtrip through a pluggable autoencoder; identity backend passes
// through unchanged.
inline Image autoencoder_roundtrip(const Image& img, const AutoencoderBackend* backend) {
    check_image(img, "autoencoder_roundtrip");
    if (backend == nullptr)
        throw std::runtime_error(
            "autoencoder_roundtrip: no backend loaded; configure the 'identity' backend for "
            "tests or provide tiny/pretrained weights");
    Image out = backend->roundtrip(img);
    if (out.h != img.h || out.w != img.w)
        throw std::runtime_error("autoencoder_roundtrip: backend changed the image shape");
    out.clip01();
    return out;
}

// Evaluation-path distortion. Deterministic per (spec, seed); outputs are
// clipped to [0,1]. `real_crop` is the only kind that changes resolution.
inline Image apply_distortion(const Image& img, const DistortionSpec& spec, std::uint64_t seed,
                              const AutoencoderBackend* autoencoder = nullptr) {
    check_image(img, "apply_distortion");
    spec.validate();
    Rng rng(derive_seed(seed, std::uint64_t(spec.kind)));
    Image out;

    switch (spec.kind) {
    case DistortionKind::Identity: out = img; break;

    case DistortionKind::RealCrop: {
        const auto wnd = distort_detail::crop_window(rng, img.h, img.w, spec.param("ratio"));
        out = Image(wnd.height, wnd.width, img.c);
        for (int y = 0; y < wnd.height; ++y)
            for (int x = 0; x < wnd.width; ++x)
                for (int c = 0; c < img.c; ++c)
                    out.at(y, x, c) = img.at(wnd.top + y, wnd.left + x, c);
        break;
    }

    case DistortionKind::Crop: {
        const auto wnd = distort_detail::crop_window(rng, img.h, img.w, spec.param("ratio"));
        out = Image(img.h, img.w, img.c);
        for (int y = 0; y < wnd.height; ++y)
            for (int x = 0; x < wnd.width; ++x)
                for (int c = 0; c < img.c; ++c)
                    out.at(wnd.top + y, wnd.left + x, c) = img.at(wnd.top + y, wnd.left + x, c);
        break;
    }

    case DistortionKind::Dropout: {
        const double f = spec.param("fraction");
        out = img;
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                if (rng.uniform() < f)
                    for (int c = 0; c < img.c; ++c) out.at(y, x, c) = 0.0f;
        break;
    }

    case DistortionKind::Resize: {
        const double f = spec.param("factor");
        const int sh = std::max(1, int(std::lround(img.h * f)));
        const int sw = std::max(1, int(std::lround(img.w * f)));
        out = resize_bilinear(resize_bilinear(img, sh, sw), img.h, img.w);
        break;
    }

    case DistortionKind::Jpeg: {
        const int q = int(std::lround(spec.param("quality")));
        out = decode_jpeg(encode_jpeg(img, q));
        break;
    }

    case DistortionKind::GaussianBlur: out = gaussian_blur(img, spec.param("sigma")); break;

    case DistortionKind::GaussianNoise: {
        const double s = spec.param("sigma");
        out = img;
        for (auto& v : out.px) v += float(rng.normal(0.0, s));
        break;
    }

    case DistortionKind::Brightness: {
        const float f = float(spec.param("factor"));
        out = img;
        for (auto& v : out.px) v *= f;
        break;
    }

    case DistortionKind::Contrast: {
        const float f = float(spec.param("factor"));
        const float m = float(distort_detail::mean_luma(img));
        out = img;
        for (auto& v : out.px) v = f * v + (1.0f - f) * m;
        break;
    }

    case DistortionKind::Saturation: {
        const float f = float(spec.param("factor"));
        out = img;
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const float g = luma_at(img, y, x);
                for (int c = 0; c < img.c; ++c)
                    out.at(y, x, c) = f * img.at(y, x, c) + (1.0f - f) * g;
            }
        break;
    }

    case DistortionKind::Grayscale: {
        out = Image(img.h, img.w, img.c);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                const float g = luma_at(img, y, x);
                for (int c = 0; c < img.c; ++c) out.at(y, x, c) = g;
            }
        break;
    }

    case DistortionKind::RandomWarp: {
        WarpSpec ws;
        ws.sigma = spec.param_or("sigma", 1.5);
        ws.scale = spec.param_or("scale", 0.015);
        ws.grid_size = int(spec.param_or("grid_size", 8));
        ws.seed = seed;
        out = random_warp(img, ws);
        break;
    }

    case DistortionKind::AutoencoderRoundtrip:
        out = autoencoder_roundtrip(img, autoencoder);
        break;
    }

    out.clip01();
    return out;
}

} // namespace i2vwm
