#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "i2vwm/distortion/autoencoder.hpp"
#include "i2vwm/distortion/classical.hpp"
#include "i2vwm/distortion/jpeg_surrogate.hpp"
#include "i2vwm/distortion/pool.hpp"
#include "i2vwm/distortion/spec.hpp"
#include "i2vwm/distortion/warp.hpp"

namespace i2vwm {

// Differentiable training-path application of a distortion to a batch.
// Forward realizations match the distortion semantics of the evaluation
// path; backward is the exact adjoint where the op is linear, the clip
// subgradient elsewhere, and a declared straight-through pass for the JPEG
// surrogate's quantizer.
struct NoiseOut {
    Tensor value;
    std::function<Tensor(const Tensor&)> backward;
};

namespace noise_detail {

// clip to [0,1]; mask records the pass-through region
inline Tensor clip01_masked(Tensor t, std::shared_ptr<std::vector<std::uint8_t>> mask) {
    mask->assign(std::size_t(t.numel()), 1);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        if (t[i] <= 0.0f) {
            t[i] = 0.0f;
            (*mask)[std::size_t(i)] = 0;
        } else if (t[i] >= 1.0f) {
            t[i] = 1.0f;
            (*mask)[std::size_t(i)] = 0;
        }
    }
    return t;
}

inline Tensor apply_mask(Tensor g, const std::vector<std::uint8_t>& mask) {
    for (std::int64_t i = 0; i < g.numel(); ++i)
        if (!mask[std::size_t(i)]) g[i] = 0.0f;
    return g;
}

struct Tap {
    int i0, i1;
    float w0, w1;
};

inline Tap axis_tap(float pos, int n) {
    const int i0 = int(std::floor(pos));
    const float a = pos - float(i0);
    Tap t;
    t.i0 = std::clamp(i0, 0, n - 1);
    t.i1 = std::clamp(i0 + 1, 0, n - 1);
    t.w0 = 1.0f - a;
    t.w1 = a;
    return t;
}

// Half-pixel-center bilinear resize of one plane, plus its exact adjoint.
inline void resize_plane(const float* src, int sh, int sw, float* dst, int dh, int dw) {
    const float sy = float(sh) / float(dh), sx = float(sw) / float(dw);
    for (int y = 0; y < dh; ++y) {
        const Tap ty = axis_tap((float(y) + 0.5f) * sy - 0.5f, sh);
        for (int x = 0; x < dw; ++x) {
            const Tap tx = axis_tap((float(x) + 0.5f) * sx - 0.5f, sw);
            dst[y * dw + x] = ty.w0 * (tx.w0 * src[ty.i0 * sw + tx.i0] + tx.w1 * src[ty.i0 * sw + tx.i1]) +
                              ty.w1 * (tx.w0 * src[ty.i1 * sw + tx.i0] + tx.w1 * src[ty.i1 * sw + tx.i1]);
        }
    }
}

inline void resize_plane_adjoint(const float* gdst, int dh, int dw, float* gsrc, int sh, int sw) {
    const float sy = float(sh) / float(dh), sx = float(sw) / float(dw);
    for (int y = 0; y < dh; ++y) {
        const Tap ty = axis_tap((float(y) + 0.5f) * sy - 0.5f, sh);
        for (int x = 0; x < dw; ++x) {
            const Tap tx = axis_tap((float(x) + 0.5f) * sx - 0.5f, sw);
            const float g = gdst[y * dw + x];
            gsrc[ty.i0 * sw + tx.i0] += ty.w0 * tx.w0 * g;
            gsrc[ty.i0 * sw + tx.i1] += ty.w0 * tx.w1 * g;
            gsrc[ty.i1 * sw + tx.i0] += ty.w1 * tx.w0 * g;
            gsrc[ty.i1 * sw + tx.i1] += ty.w1 * tx.w1 * g;
        }
    }
}

inline Tensor resize_tensor(const Tensor& x, int dh, int dw) {
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, dh, dw});
    for (std::int64_t p = 0; p < n * c; ++p)
        resize_plane(x.data() + p * h * w, int(h), int(w), y.data() + std::int64_t(p) * dh * dw, dh,
                     dw);
    return y;
}

inline Tensor resize_tensor_adjoint(const Tensor& g, int sh, int sw) {
    const std::int64_t n = g.dim(0), c = g.dim(1), dh = g.dim(2), dw = g.dim(3);
    Tensor out({n, c, sh, sw});
    for (std::int64_t p = 0; p < n * c; ++p)
        resize_plane_adjoint(g.data() + p * dh * dw, int(dh), int(dw),
                             out.data() + std::int64_t(p) * sh * sw, sh, sw);
    return out;
}

// 1-D replicate-border Gaussian pass along x or y, with exact adjoint.
inline void blur_pass(const float* src, float* dst, int h, int w, const std::vector<float>& k,
                      bool horizontal) {
    const int r = int(k.size()) / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -r; i <= r; ++i) {
                const int yy = horizontal ? y : std::clamp(y + i, 0, h - 1);
                const int xx = horizontal ? std::clamp(x + i, 0, w - 1) : x;
                acc += k[std::size_t(i + r)] * src[yy * w + xx];
            }
            dst[y * w + x] = acc;
        }
}

inline void blur_pass_adjoint(const float* g, float* out, int h, int w, const std::vector<float>& k,
                              bool horizontal) {
    const int r = int(k.size()) / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float gv = g[y * w + x];
            for (int i = -r; i <= r; ++i) {
                const int yy = horizontal ? y : std::clamp(y + i, 0, h - 1);
                const int xx = horizontal ? std::clamp(x + i, 0, w - 1) : x;
                out[yy * w + xx] += k[std::size_t(i + r)] * gv;
            }
        }
}

} // namespace noise_detail

inline NoiseOut apply_noise_layer(const Tensor& x, const DistortionSpec& spec, std::uint64_t seed,
                                  const AutoencoderBackend* autoencoder = nullptr) {
    using namespace noise_detail;
    spec.validate();
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::int64_t plane = h * w;

    switch (spec.kind) {
    case DistortionKind::Identity:
        return {x, [](const Tensor& g) { return g; }};

    case DistortionKind::GaussianNoise: {
        const double s = spec.param("sigma");
        Tensor t = x;
        for (std::int64_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, 0x676eULL, std::uint64_t(i)));
            float* p = t.data() + i * c * plane;
            for (std::int64_t j = 0; j < c * plane; ++j) p[j] += float(rng.normal(0.0, s));
        }
        auto mask = std::make_shared<std::vector<std::uint8_t>>();
        Tensor y = clip01_masked(std::move(t), mask);
        return {std::move(y), [mask](const Tensor& g) { return apply_mask(g, *mask); }};
    }

    case DistortionKind::Brightness: {
        const float f = float(spec.param("factor"));
        Tensor t = x;
        for (auto& v : t.vec()) v *= f;
        auto mask = std::make_shared<std::vector<std::uint8_t>>();
        Tensor y = clip01_masked(std::move(t), mask);
        return {std::move(y), [mask, f](const Tensor& g) {
                    Tensor gg = apply_mask(g, *mask);
                    gg *= f;
                    return gg;
                }};
    }

    case DistortionKind::Contrast: {
        // out = f*x + (1-f)*m with m the luma mean; the mean term carries
        // gradient (1-f) * w_c / plane to every pixel
        const float f = float(spec.param("factor"));
        static const float lw[3] = {0.299f, 0.587f, 0.114f};
        Tensor t = x;
        for (std::int64_t i = 0; i < n; ++i) {
            const float* r = x.data() + (i * c + 0) * plane;
            const float* g0 = x.data() + (i * c + 1) * plane;
            const float* b = x.data() + (i * c + 2) * plane;
            double m = 0.0;
            for (std::int64_t p = 0; p < plane; ++p)
                m += 0.299 * r[p] + 0.587 * g0[p] + 0.114 * b[p];
            const float mf = float(m / double(plane));
            float* tp = t.data() + i * c * plane;
            for (std::int64_t j = 0; j < c * plane; ++j) tp[j] = f * tp[j] + (1.0f - f) * mf;
        }
        auto mask = std::make_shared<std::vector<std::uint8_t>>();
        Tensor y = clip01_masked(std::move(t), mask);
        return {std::move(y), [mask, f, n, c, plane](const Tensor& g) {
                    Tensor gm = apply_mask(g, *mask);
                    Tensor out = gm;
                    out *= f;
                    for (std::int64_t i = 0; i < n; ++i) {
                        double s = 0.0;
                        const float* gp = gm.data() + i * c * plane;
                        for (std::int64_t j = 0; j < c * plane; ++j) s += gp[j];
                        const float add = float((1.0 - double(f)) * s / double(plane));
                        for (std::int64_t ch = 0; ch < c; ++ch) {
                            float* op = out.data() + (i * c + ch) * plane;
                            for (std::int64_t p = 0; p < plane; ++p) op[p] += add * lw[ch];
                        }
                    }
                    return out;
                }};
    }

    case DistortionKind::Saturation:
    case DistortionKind::Grayscale: {
        const float f = spec.kind == DistortionKind::Saturation ? float(spec.param("factor")) : 0.0f;
        static const float lw[3] = {0.299f, 0.587f, 0.114f};
        Tensor t(x.shape());
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t p = 0; p < plane; ++p) {
                const float r = x.data()[(i * c + 0) * plane + p];
                const float g0 = x.data()[(i * c + 1) * plane + p];
                const float b = x.data()[(i * c + 2) * plane + p];
                const float luma = lw[0] * r + lw[1] * g0 + lw[2] * b;
                t.data()[(i * c + 0) * plane + p] = f * r + (1.0f - f) * luma;
                t.data()[(i * c + 1) * plane + p] = f * g0 + (1.0f - f) * luma;
                t.data()[(i * c + 2) * plane + p] = f * b + (1.0f - f) * luma;
            }
        auto mask = std::make_shared<std::vector<std::uint8_t>>();
        Tensor y = clip01_masked(std::move(t), mask);
        return {std::move(y), [mask, f, n, c, plane](const Tensor& g) {
                    Tensor gm = apply_mask(g, *mask);
                    Tensor out(gm.shape());
                    for (std::int64_t i = 0; i < n; ++i)
                        for (std::int64_t p = 0; p < plane; ++p) {
                            const float gr = gm.data()[(i * c + 0) * plane + p];
                            const float gg = gm.data()[(i * c + 1) * plane + p];
                            const float gb = gm.data()[(i * c + 2) * plane + p];
                            const float s = gr + gg + gb;
                            out.data()[(i * c + 0) * plane + p] = f * gr + (1.0f - f) * lw[0] * s;
                            out.data()[(i * c + 1) * plane + p] = f * gg + (1.0f - f) * lw[1] * s;
                            out.data()[(i * c + 2) * plane + p] = f * gb + (1.0f - f) * lw[2] * s;
                        }
                    return out;
                }};
    }

    case DistortionKind::Dropout: {
        const double frac = spec.param("fraction");
        auto keep = std::make_shared<std::vector<std::uint8_t>>(std::size_t(n * plane), 1);
        Tensor y = x;
        for (std::int64_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, 0x64726fULL, std::uint64_t(i)));
            for (std::int64_t p = 0; p < plane; ++p)
                if (rng.uniform() < frac) {
                    (*keep)[std::size_t(i * plane + p)] = 0;
                    for (std::int64_t ch = 0; ch < c; ++ch) y.data()[(i * c + ch) * plane + p] = 0.0f;
                }
        }
        return {std::move(y), [keep, n, c, plane](const Tensor& g) {
                    Tensor out = g;
                    for (std::int64_t i = 0; i < n; ++i)
                        for (std::int64_t p = 0; p < plane; ++p)
                            if (!(*keep)[std::size_t(i * plane + p)])
                                for (std::int64_t ch = 0; ch < c; ++ch)
                                    out.data()[(i * c + ch) * plane + p] = 0.0f;
                    return out;
                }};
    }

    case DistortionKind::Crop: {
        const double ratio = spec.param("ratio");
        auto keep = std::make_shared<std::vector<std::uint8_t>>(std::size_t(n * plane), 0);
        Tensor y(x.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, 0x63726fULL, std::uint64_t(i)));
            const auto wnd = distort_detail::crop_window(rng, int(h), int(w), ratio);
            for (int yy = wnd.top; yy < wnd.top + wnd.height; ++yy)
                for (int xx = wnd.left; xx < wnd.left + wnd.width; ++xx) {
                    (*keep)[std::size_t(i * plane + yy * w + xx)] = 1;
                    for (std::int64_t ch = 0; ch < c; ++ch)
                        y.data()[(i * c + ch) * plane + yy * w + xx] =
                            x.data()[(i * c + ch) * plane + yy * w + xx];
                }
        }
        return {std::move(y), [keep, n, c, plane](const Tensor& g) {
                    Tensor out(g.shape());
                    for (std::int64_t i = 0; i < n; ++i)
                        for (std::int64_t p = 0; p < plane; ++p)
                            if ((*keep)[std::size_t(i * plane + p)])
                                for (std::int64_t ch = 0; ch < c; ++ch)
                                    out.data()[(i * c + ch) * plane + p] =
                                        g.data()[(i * c + ch) * plane + p];
                    return out;
                }};
    }

    case DistortionKind::RealCrop: {
        // excise the window, rescale back to native for the decode path
        const double ratio = spec.param("ratio");
        auto windows = std::make_shared<std::vector<distort_detail::CropWindow>>();
        Tensor y(x.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, 0x726350ULL, std::uint64_t(i)));
            const auto wnd = distort_detail::crop_window(rng, int(h), int(w), ratio);
            windows->push_back(wnd);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                std::vector<float> sub(std::size_t(wnd.height) * wnd.width);
                for (int yy = 0; yy < wnd.height; ++yy)
                    for (int xx = 0; xx < wnd.width; ++xx)
                        sub[std::size_t(yy) * wnd.width + xx] =
                            x.data()[(i * c + ch) * plane + (wnd.top + yy) * w + (wnd.left + xx)];
                resize_plane(sub.data(), wnd.height, wnd.width,
                             y.data() + (i * c + ch) * plane, int(h), int(w));
            }
        }
        return {std::move(y), [windows, n, c, h, w, plane](const Tensor& g) {
                    Tensor out({n, c, h, w});
                    for (std::int64_t i = 0; i < n; ++i) {
                        const auto& wnd = (*windows)[std::size_t(i)];
                        for (std::int64_t ch = 0; ch < c; ++ch) {
                            std::vector<float> gsub(std::size_t(wnd.height) * wnd.width, 0.0f);
                            resize_plane_adjoint(g.data() + (i * c + ch) * plane, int(h), int(w),
                                                 gsub.data(), wnd.height, wnd.width);
                            for (int yy = 0; yy < wnd.height; ++yy)
                                for (int xx = 0; xx < wnd.width; ++xx)
                                    out.data()[(i * c + ch) * plane + (wnd.top + yy) * w +
                                               (wnd.left + xx)] =
                                        gsub[std::size_t(yy) * wnd.width + xx];
                        }
                    }
                    return out;
                }};
    }

    case DistortionKind::Resize: {
        const double f = spec.param("factor");
        const int sh = std::max<int>(1, int(std::lround(double(h) * f)));
        const int sw = std::max<int>(1, int(std::lround(double(w) * f)));
        Tensor down = resize_tensor(x, sh, sw);
        Tensor y = resize_tensor(down, int(h), int(w));
        return {std::move(y), [sh, sw, h, w](const Tensor& g) {
                    Tensor gd = resize_tensor_adjoint(g, sh, sw);
                    return resize_tensor_adjoint(gd, int(h), int(w));
                }};
    }

    case DistortionKind::GaussianBlur: {
        const double s = spec.param("sigma");
        if (s <= 0.0) return {x, [](const Tensor& g) { return g; }};
        auto k = std::make_shared<std::vector<float>>(distort_detail::gaussian_kernel(s));
        Tensor y(x.shape());
        std::vector<float> tmp(static_cast<std::size_t>(plane));
        for (std::int64_t p = 0; p < n * c; ++p) {
            blur_pass(x.data() + p * plane, tmp.data(), int(h), int(w), *k, true);
            blur_pass(tmp.data(), y.data() + p * plane, int(h), int(w), *k, false);
        }
        return {std::move(y), [k, n, c, h, w, plane](const Tensor& g) {
                    Tensor out({n, c, h, w});
                    std::vector<float> t1(static_cast<std::size_t>(plane));
                    for (std::int64_t p = 0; p < n * c; ++p) {
                        std::fill(t1.begin(), t1.end(), 0.0f);
                        blur_pass_adjoint(g.data() + p * plane, t1.data(), int(h), int(w), *k, false);
                        std::vector<float> t2(std::size_t(plane), 0.0f);
                        blur_pass_adjoint(t1.data(), t2.data(), int(h), int(w), *k, true);
                        std::copy(t2.begin(), t2.end(), out.data() + p * plane);
                    }
                    return out;
                }};
    }

    case DistortionKind::Jpeg: {
        const int q = int(std::lround(spec.param("quality")));
        Tensor y = jpeg_surrogate::forward(x, q);
        return {std::move(y), [](const Tensor& g) { return g; }};
    }

    case DistortionKind::RandomWarp: {
        WarpSpec base;
        base.sigma = spec.param_or("sigma", 1.5);
        base.scale = spec.param_or("scale", 0.015);
        base.grid_size = int(spec.param_or("grid_size", 8));
        auto grids = std::make_shared<std::vector<std::vector<float>>>();
        Tensor y(x.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            WarpSpec ws = base;
            ws.seed = derive_seed(seed, 0x777270ULL, std::uint64_t(i));
            grids->push_back(warp_grid(ws, int(h), int(w)));
            const auto& grid = grids->back();
            for (std::int64_t uu = 0; uu < h; ++uu)
                for (std::int64_t vv = 0; vv < w; ++vv) {
                    const float* gp = grid.data() + (std::size_t(uu) * w + vv) * 2;
                    const Tap tx = axis_tap((gp[0] + 1.0f) * 0.5f * float(w - 1), int(w));
                    const Tap ty = axis_tap((gp[1] + 1.0f) * 0.5f * float(h - 1), int(h));
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const float* src = x.data() + (i * c + ch) * plane;
                        y.data()[(i * c + ch) * plane + uu * w + vv] =
                            ty.w0 * (tx.w0 * src[ty.i0 * w + tx.i0] + tx.w1 * src[ty.i0 * w + tx.i1]) +
                            ty.w1 * (tx.w0 * src[ty.i1 * w + tx.i0] + tx.w1 * src[ty.i1 * w + tx.i1]);
                    }
                }
        }
        return {std::move(y), [grids, n, c, h, w, plane](const Tensor& g) {
                    Tensor out({n, c, h, w});
                    for (std::int64_t i = 0; i < n; ++i) {
                        const auto& grid = (*grids)[std::size_t(i)];
                        for (std::int64_t uu = 0; uu < h; ++uu)
                            for (std::int64_t vv = 0; vv < w; ++vv) {
                                const float* gp = grid.data() + (std::size_t(uu) * w + vv) * 2;
                                const Tap tx = axis_tap((gp[0] + 1.0f) * 0.5f * float(w - 1), int(w));
                                const Tap ty = axis_tap((gp[1] + 1.0f) * 0.5f * float(h - 1), int(h));
                                for (std::int64_t ch = 0; ch < c; ++ch) {
                                    const float gv = g.data()[(i * c + ch) * plane + uu * w + vv];
                                    float* dst = out.data() + (i * c + ch) * plane;
                                    dst[ty.i0 * w + tx.i0] += ty.w0 * tx.w0 * gv;
                                    dst[ty.i0 * w + tx.i1] += ty.w0 * tx.w1 * gv;
                                    dst[ty.i1 * w + tx.i0] += ty.w1 * tx.w0 * gv;
                                    dst[ty.i1 * w + tx.i1] += ty.w1 * tx.w1 * gv;
                                }
                            }
                    }
                    return out;
                }};
    }

    case DistortionKind::AutoencoderRoundtrip: {
        if (!autoencoder)
            throw std::runtime_error("noise layer: autoencoder family sampled but no backend loaded");
        auto tr = std::make_shared<nn::Trace>();
        Tensor y = autoencoder->roundtrip_tensor(x, tr.get());
        return {std::move(y),
                [tr, autoencoder](const Tensor& g) { return autoencoder->backward_tensor(g, *tr); }};
    }
    }
    throw std::logic_error("apply_noise_layer: unhandled distortion kind");
}

} // namespace i2vwm
