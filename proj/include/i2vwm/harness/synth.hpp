#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "i2vwm/core/image.hpp"
#include "i2vwm/core/imageio.hpp"
#include "i2vwm/core/rng.hpp"

namespace i2vwm {

// Procedural stand-in for natural photos: layered low-frequency color
// fields with a roughly 1/f spectrum, soft-edged shapes for occlusion
// boundaries, directional texture and grain. Deterministic per seed.
inline Image synthesize_photo(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, 3);

    // base: three octaves of smooth value noise with a random color ramp
    float ramp[2][3];
    for (int k = 0; k < 2; ++k)
        for (int c = 0; c < 3; ++c) ramp[k][c] = rng.uniform_float();
    for (int octave = 0; octave < 3; ++octave) {
        const int g = 4 << octave;
        std::vector<float> base(std::size_t(g) * g);
        for (auto& v : base) v = rng.uniform_float();
        std::vector<float> dense(std::size_t(h) * w);
        bicubic_resample(base.data(), g, g, 1, dense.data(), h, w);
        const float amp = 1.0f / float(1 << octave);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float t = amp * dense[std::size_t(y) * w + x];
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) += t * (octave == 0 ? ramp[0][c] : ramp[1][c]);
            }
    }
    float maxv = 1e-6f;
    for (auto v : img.px) maxv = std::max(maxv, v);
    for (auto& v : img.px) v /= maxv;

    // soft-edged shapes: ellipses and axis-aligned rectangles
    const int nshapes = int(rng.uniform_int(2, 6));
    for (int s = 0; s < nshapes; ++s) {
        const bool ellipse = rng.uniform() < 0.6;
        const float cx = float(rng.uniform(0.1, 0.9)) * float(w);
        const float cy = float(rng.uniform(0.1, 0.9)) * float(h);
        const float rx = float(rng.uniform(0.05, 0.3)) * float(w);
        const float ry = float(rng.uniform(0.05, 0.3)) * float(h);
        const float soft = float(rng.uniform(0.5, 4.0));
        float color[3];
        for (auto& c : color) c = rng.uniform_float();
        const float opacity = float(rng.uniform(0.4, 0.95));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float d;
                if (ellipse) {
                    const float dx = (float(x) - cx) / rx;
                    const float dy = (float(y) - cy) / ry;
                    d = std::sqrt(dx * dx + dy * dy) - 1.0f;
                } else {
                    const float dx = std::fabs(float(x) - cx) - rx;
                    const float dy = std::fabs(float(y) - cy) - ry;
                    d = std::max(dx / rx, dy / ry);
                }
                const float a = opacity / (1.0f + std::exp(d * 20.0f / soft));
                if (a > 1e-3f)
                    for (int c = 0; c < 3; ++c)
                        img.at(y, x, c) = (1.0f - a) * img.at(y, x, c) + a * color[c];
            }
    }

    // directional texture patch
    if (rng.uniform() < 0.7) {
        const float freq = float(rng.uniform(0.05, 0.45));
        const float angle = float(rng.uniform(0.0, 3.14159));
        const float amp = float(rng.uniform(0.02, 0.08));
        const float ca = std::cos(angle), sa = std::sin(angle);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float t = amp * std::sin(freq * (ca * float(x) + sa * float(y)));
                for (int c = 0; c < 3; ++c) img.at(y, x, c) += t;
            }
    }

    // grain
    const float grain = float(rng.uniform(0.002, 0.015));
    for (auto& v : img.px) v += float(rng.normal(0.0, grain));

    img.clip01();
    return img;
}

// Numbered PNG corpus under dir; returns the number of files written.
inline int write_synthetic_corpus(const std::string& dir, int count, int h, int w,
                                  std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.png", i);
        write_png((fs::path(dir) / name).string(), synthesize_photo(h, w, derive_seed(seed, i)));
    }
    return count;
}

} // namespace i2vwm
