#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "i2vwm/core/tensor.hpp"

namespace i2vwm {

// Training-time JPEG stand-in: YCbCr conversion, blockwise 8x8 DCT,
// quantization with the standard tables at the requested quality, inverse
// transform. The quantizer is treated as straight-through during backprop,
// so the surrogate supplies realistic forward corruption with an identity
// gradient. Evaluation always uses the real codec instead.
namespace jpeg_surrogate {

inline const int kLumaTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline const int kChromaTable[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99,
    99, 99, 47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

inline void quality_scaled_table(const int* base, int quality, float* out) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    for (int i = 0; i < 64; ++i) {
        int q = (base[i] * scale + 50) / 100;
        q = std::min(255, std::max(1, q));
        out[i] = float(q);
    }
}

// Orthonormal DCT-II basis for N=8.
inline const std::array<std::array<float, 8>, 8>& dct_basis() {
    static const auto basis = [] {
        std::array<std::array<float, 8>, 8> b{};
        for (int u = 0; u < 8; ++u) {
            const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                b[std::size_t(u)][std::size_t(x)] =
                    float(cu * std::cos((2.0 * x + 1.0) * u * 3.14159265358979323846 / 16.0));
        }
        return b;
    }();
    return basis;
}

inline void dct8x8(const float* in, float* out) {
    const auto& b = dct_basis();
    float tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            float acc = 0.0f;
            for (int y = 0; y < 8; ++y) acc += b[std::size_t(u)][std::size_t(y)] * in[x * 8 + y];
            tmp[x * 8 + u] = acc;
        }
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            float acc = 0.0f;
            for (int x = 0; x < 8; ++x) acc += b[std::size_t(v)][std::size_t(x)] * tmp[x * 8 + u];
            out[v * 8 + u] = acc;
        }
}

inline void idct8x8(const float* in, float* out) {
    const auto& b = dct_basis();
    float tmp[64];
    for (int x = 0; x < 8; ++x)
        for (int u = 0; u < 8; ++u) {
            float acc = 0.0f;
            for (int v = 0; v < 8; ++v) acc += b[std::size_t(v)][std::size_t(x)] * in[v * 8 + u];
            tmp[x * 8 + u] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            float acc = 0.0f;
            for (int u = 0; u < 8; ++u) acc += b[std::size_t(u)][std::size_t(y)] * tmp[x * 8 + u];
            out[x * 8 + y] = acc;
        }
}

// Quantize one channel plane (0..255 domain, values already centered at 0).
inline void quantize_plane(float* plane, int h, int w, const float* table) {
    float block[64], coeff[64];
    for (int by = 0; by + 8 <= h; by += 8)
        for (int bx = 0; bx + 8 <= w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) block[y * 8 + x] = plane[(by + y) * w + bx + x];
            dct8x8(block, coeff);
            for (int i = 0; i < 64; ++i) coeff[i] = table[i] * std::round(coeff[i] / table[i]);
            idct8x8(coeff, block);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) plane[(by + y) * w + bx + x] = block[y * 8 + x];
        }
}

// Batch forward over (N,3,H,W) in [0,1]; output clipped to [0,1].
// H and W must be multiples of 8 (training resolutions are).
inline Tensor forward(const Tensor& x, int quality) {
    const std::int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (h % 8 != 0 || w % 8 != 0)
        throw std::invalid_argument("jpeg surrogate: spatial size must be a multiple of 8");
    float lt[64], ct[64];
    quality_scaled_table(kLumaTable, quality, lt);
    quality_scaled_table(kChromaTable, quality, ct);

    Tensor out(x.shape());
    const std::int64_t plane = h * w;
    std::vector<float> ych(static_cast<std::size_t>(plane)), cb(static_cast<std::size_t>(plane)), cr(static_cast<std::size_t>(plane));
    for (std::int64_t i = 0; i < n; ++i) {
        const float* r = x.data() + (i * 3 + 0) * plane;
        const float* g = x.data() + (i * 3 + 1) * plane;
        const float* b = x.data() + (i * 3 + 2) * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            const float R = r[p] * 255.0f, G = g[p] * 255.0f, B = b[p] * 255.0f;
            ych[std::size_t(p)] = 0.299f * R + 0.587f * G + 0.114f * B - 128.0f;
            cb[std::size_t(p)] = -0.168736f * R - 0.331264f * G + 0.5f * B;
            cr[std::size_t(p)] = 0.5f * R - 0.418688f * G - 0.081312f * B;
        }
        quantize_plane(ych.data(), int(h), int(w), lt);
        quantize_plane(cb.data(), int(h), int(w), ct);
        quantize_plane(cr.data(), int(h), int(w), ct);
        float* ro = out.data() + (i * 3 + 0) * plane;
        float* go = out.data() + (i * 3 + 1) * plane;
        float* bo = out.data() + (i * 3 + 2) * plane;
        for (std::int64_t p = 0; p < plane; ++p) {
            const float Y = ych[std::size_t(p)] + 128.0f;
            const float Cb = cb[std::size_t(p)];
            const float Cr = cr[std::size_t(p)];
            ro[p] = std::min(1.0f, std::max(0.0f, (Y + 1.402f * Cr) / 255.0f));
            go[p] = std::min(1.0f, std::max(0.0f, (Y - 0.344136f * Cb - 0.714136f * Cr) / 255.0f));
            bo[p] = std::min(1.0f, std::max(0.0f, (Y + 1.772f * Cb) / 255.0f));
        }
    }
    return out;
}

} // namespace jpeg_surrogate

} // namespace i2vwm
