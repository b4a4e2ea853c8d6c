#pragma once

// Independent scalar-loop reference implementations used to freeze expected
// values. These deliberately avoid the library's own vectorized paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/distortion/warp.hpp"
#include "i2vwm/metrics/accuracy.hpp"
#include "i2vwm/model/message.hpp"

namespace i2vwm::testing {

inline double mse_loop(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        acc += d * d;
    }
    return acc / double(a.size());
}

inline std::vector<double> column_means_loop(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out(rows[0].size(), 0.0);
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < rows.size(); ++j) acc += rows[j][i];
        out[i] = acc / double(rows.size());
    }
    return out;
}

inline double grand_mean_loop(const std::vector<std::vector<double>>& rows) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& r : rows)
        for (double v : r) {
            acc += v;
            ++count;
        }
    return acc / double(count);
}

// Exhaustive per-bit counting majority vote.
inline WatermarkMessage vote_loop(const std::vector<WatermarkMessage>& msgs) {
    const std::size_t len = msgs[0].size();
    std::vector<std::uint8_t> bits(len, 0);
    for (std::size_t j = 0; j < len; ++j) {
        int ones = 0;
        for (const auto& m : msgs) ones += m[j];
        bits[j] = (2 * ones >= int(msgs.size())) ? 1 : 0;
    }
    return WatermarkMessage(bits);
}

// Elementwise clamp-fusion rule evaluated with plain scalar loops.
inline Image fuse_loop(const Image& original, const Image& wm, const Image& threshold,
                       double lambda) {
    Image out(original.h, original.w, original.c);
    for (int y = 0; y < original.h; ++y)
        for (int x = 0; x < original.w; ++x)
            for (int c = 0; c < original.c; ++c) {
                const double r = double(wm.at(y, x, c)) - double(original.at(y, x, c));
                const double t = double(threshold.at(y, x, 0));
                double clamped = std::min(std::fabs(r), t);
                if (r < 0) clamped = -clamped;
                double v = double(original.at(y, x, c)) + lambda * clamped;
                v = std::min(1.0, std::max(0.0, v));
                out.at(y, x, c) = float(v);
            }
    return out;
}

// Independent implementation of the random warp chain, sharing the sampled
// control-point field with the implementation under test: bicubic
// upsampling (Keys a=-0.75, half-pixel centers), normalized base grid,
// displaced grid, bilinear border-replicate sampling. All double precision.
inline Image warp_reference(const Image& img, const WarpSpec& spec) {
    const auto low = warp_displacement_low(spec);
    const int g = spec.grid_size;
    const int h = img.h, w = img.w;

    auto cubic = [](double t) {
        const double a = -0.75;
        t = std::fabs(t);
        if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
        if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
        return 0.0;
    };

    auto low_at = [&](int y, int x, int comp) {
        y = std::clamp(y, 0, g - 1);
        x = std::clamp(x, 0, g - 1);
        return double(low[(std::size_t(y) * g + x) * 2 + comp]);
    };

    std::vector<double> dense(std::size_t(h) * w * 2);
    for (int y = 0; y < h; ++y) {
        const double fy = (double(y) + 0.5) * double(g) / double(h) - 0.5;
        const int y0 = int(std::floor(fy)) - 1;
        for (int x = 0; x < w; ++x) {
            const double fx = (double(x) + 0.5) * double(g) / double(w) - 0.5;
            const int x0 = int(std::floor(fx)) - 1;
            for (int comp = 0; comp < 2; ++comp) {
                double acc = 0.0;
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        acc += cubic(fy - double(y0 + i)) * cubic(fx - double(x0 + j)) *
                               low_at(y0 + i, x0 + j, comp);
                dense[(std::size_t(y) * w + x) * 2 + comp] = acc;
            }
        }
    }

    Image out(h, w, img.c);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            const double gx =
                (w > 1 ? 2.0 * v / double(w - 1) - 1.0 : 0.0) +
                spec.scale * dense[(std::size_t(u) * w + v) * 2 + 0];
            const double gy =
                (h > 1 ? 2.0 * u / double(h - 1) - 1.0 : 0.0) +
                spec.scale * dense[(std::size_t(u) * w + v) * 2 + 1];
            const double fx = (gx + 1.0) * 0.5 * double(w - 1);
            const double fy = (gy + 1.0) * 0.5 * double(h - 1);
            const int x0 = int(std::floor(fx));
            const int y0 = int(std::floor(fy));
            const double ax = fx - x0, ay = fy - y0;
            for (int c = 0; c < img.c; ++c) {
                auto px = [&](int yy, int xx) {
                    return double(img.at(std::clamp(yy, 0, h - 1), std::clamp(xx, 0, w - 1), c));
                };
                const double val = (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
                                   ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
                out.at(u, v, c) = float(val);
            }
        }
    return out;
}

} // namespace i2vwm::testing
