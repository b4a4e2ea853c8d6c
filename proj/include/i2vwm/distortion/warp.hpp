#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/core/rng.hpp"

namespace i2vwm {

// Smooth random warp: Gaussian control-point displacements, bicubic
// upsampling to a dense field, displaced normalized sampling grid, bilinear
// resampling with border replication.
struct WarpSpec {
    double sigma = 1.5;   // std of control-point displacement
    double scale = 0.015; // displacement scale in normalized grid units
    int grid_size = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (sigma < 0.0) throw std::invalid_argument("WarpSpec: sigma must be nonnegative");
        if (scale < 0.0) throw std::invalid_argument("WarpSpec: scale must be nonnegative");
        if (grid_size < 2) throw std::invalid_argument("WarpSpec: grid_size must be at least 2");
    }
};

// Control-point displacements, (grid,grid,2) interleaved (dx, dy), drawn
// N(0, sigma^2) under spec.seed. Exposed so independent re-implementations
// can share the sampled field.
inline std::vector<float> warp_displacement_low(const WarpSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0x77617270ULL));
    std::vector<float> disp(std::size_t(spec.grid_size) * spec.grid_size * 2);
    for (auto& v : disp) v = float(rng.normal(0.0, spec.sigma));
    return disp;
}

// Dense displacement field (h,w,2) in normalized grid units: bicubic
// upsampling of the control points.
inline std::vector<float> warp_displacement(const WarpSpec& spec, int h, int w) {
    const auto low = warp_displacement_low(spec);
    std::vector<float> dense(std::size_t(h) * w * 2);
    bicubic_resample(low.data(), spec.grid_size, spec.grid_size, 2, dense.data(), h, w);
    return dense;
}

// Final normalized sampling grid (h,w,2): base grid plus scaled displacement.
// Base grid follows the align-corners convention: v=0 -> -1, v=W-1 -> +1.
inline std::vector<float> warp_grid(const WarpSpec& spec, int h, int w) {
    std::vector<float> grid = warp_displacement(spec, h, w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            float* g = grid.data() + (std::size_t(u) * w + v) * 2;
            const float gx = w > 1 ? 2.0f * float(v) / float(w - 1) - 1.0f : 0.0f;
            const float gy = h > 1 ? 2.0f * float(u) / float(h - 1) - 1.0f : 0.0f;
            g[0] = gx + float(spec.scale) * g[0];
            g[1] = gy + float(spec.scale) * g[1];
        }
    return grid;
}

// Resample img at a normalized grid (align-corners mapping), bilinear with
// border replication.
inline Image grid_sample(const Image& img, const std::vector<float>& grid) {
    if (grid.size() != std::size_t(img.h) * img.w * 2)
        throw std::invalid_argument("grid_sample: grid shape mismatch");
    Image out(img.h, img.w, img.c);
    std::vector<float> px(std::size_t(img.c));
    for (int u = 0; u < img.h; ++u)
        for (int v = 0; v < img.w; ++v) {
            const float* g = grid.data() + (std::size_t(u) * img.w + v) * 2;
            const float fx = (g[0] + 1.0f) * 0.5f * float(img.w - 1);
            const float fy = (g[1] + 1.0f) * 0.5f * float(img.h - 1);
            bilinear_fetch(img, fx, fy, px.data());
            for (int ch = 0; ch < img.c; ++ch) out.at(u, v, ch) = px[ch];
        }
    return out;
}

inline Image random_warp(const Image& img, const WarpSpec& spec) {
    check_image(img, "random_warp");
    spec.validate();
    return grid_sample(img, warp_grid(spec, img.h, img.w));
}

} // namespace i2vwm
