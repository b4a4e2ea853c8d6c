#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/distortion/classical.hpp"

namespace i2vwm {

// Dense per-pixel displacement from reference coordinates to target
// content, in pixels. fx is horizontal, fy vertical.
struct FlowField {
    int h = 0;
    int w = 0;
    std::vector<float> v; // (h, w, 2) interleaved

    FlowField() = default;
    FlowField(int height, int width) : h(height), w(width), v(std::size_t(height) * width * 2, 0.0f) {}

    float& fx(int y, int x) { return v[(std::size_t(y) * w + x) * 2 + 0]; }
    float& fy(int y, int x) { return v[(std::size_t(y) * w + x) * 2 + 1]; }
    float fx(int y, int x) const { return v[(std::size_t(y) * w + x) * 2 + 0]; }
    float fy(int y, int x) const { return v[(std::size_t(y) * w + x) * 2 + 1]; }

    double mean_magnitude() const {
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); i += 2)
            acc += std::sqrt(double(v[i]) * v[i] + double(v[i + 1]) * v[i + 1]);
        return v.empty() ? 0.0 : acc / double(v.size() / 2);
    }
};

// Dense optical-flow estimator interface. The iterative correlation-volume
// estimator can sit behind this interface as an optional pretrained
// backend; the classical pyramidal estimator is always available.
class FlowBackend {
public:
    virtual ~FlowBackend() = default;
    virtual std::string name() const = 0;
    virtual FlowField estimate(const Image& ref, const Image& tar) const = 0;
    // declared bound on |F| for estimate(img, img)
    virtual double zero_motion_tolerance() const { return 0.1; }
};

// Coarse-to-fine iterative Lucas-Kanade dense flow. Deterministic and
// dependency-free; the default backend.
class PyramidalFlowBackend : public FlowBackend {
public:
    struct Options {
        int max_levels = 4;
        int min_size = 24;
        int iterations = 4;
        int window_radius = 3;
        double damping = 1e-3;
    };

    PyramidalFlowBackend() = default;
    explicit PyramidalFlowBackend(Options opt) : opt_(opt) {}

    std::string name() const override { return "classical"; }

    FlowField estimate(const Image& ref, const Image& tar) const override {
        if (ref.h != tar.h || ref.w != tar.w)
            throw std::invalid_argument("estimate_flow: frame shapes must match");
        check_image(ref, "estimate_flow");

        const std::vector<Plane> pr = pyramid(to_gray(ref));
        const std::vector<Plane> pt = pyramid(to_gray(tar));

        Plane fx, fy;
        for (std::size_t lvl = pr.size(); lvl-- > 0;) {
            const Plane& r = pr[lvl];
            const Plane& t = pt[lvl];
            if (fx.h == 0) {
                fx = Plane(r.h, r.w);
                fy = Plane(r.h, r.w);
            } else {
                fx = upsample2(fx, r.h, r.w);
                fy = upsample2(fy, r.h, r.w);
                for (auto& vv : fx.v) vv *= 2.0f;
                for (auto& vv : fy.v) vv *= 2.0f;
            }
            for (int it = 0; it < opt_.iterations; ++it) refine(r, t, fx, fy);
        }

        FlowField out(ref.h, ref.w);
        for (int y = 0; y < ref.h; ++y)
            for (int x = 0; x < ref.w; ++x) {
                out.fx(y, x) = fx.at(y, x);
                out.fy(y, x) = fy.at(y, x);
            }
        return out;
    }

private:
    struct Plane {
        int h = 0, w = 0;
        std::vector<float> v;
        Plane() = default;
        Plane(int hh, int ww) : h(hh), w(ww), v(std::size_t(hh) * ww, 0.0f) {}
        float at(int y, int x) const {
            return v[std::size_t(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
        }
        float& ref(int y, int x) { return v[std::size_t(y) * w + x]; }
    };

    static Plane from_gray(const Image& g) {
        Plane p(g.h, g.w);
        for (int y = 0; y < g.h; ++y)
            for (int x = 0; x < g.w; ++x) p.ref(y, x) = g.at(y, x, 0);
        return p;
    }

    static Plane downsample2(const Plane& p) {
        Plane out(p.h / 2, p.w / 2);
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.ref(y, x) = 0.25f * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) +
                                         p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
        return out;
    }

    static Plane upsample2(const Plane& p, int oh, int ow) {
        Plane out(oh, ow);
        const float sy = float(p.h) / float(oh), sx = float(p.w) / float(ow);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const float fy = (float(y) + 0.5f) * sy - 0.5f;
                const float fx = (float(x) + 0.5f) * sx - 0.5f;
                const int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
                const float ay = fy - float(y0), ax = fx - float(x0);
                out.ref(y, x) = (1 - ay) * ((1 - ax) * p.at(y0, x0) + ax * p.at(y0, x0 + 1)) +
                                ay * ((1 - ax) * p.at(y0 + 1, x0) + ax * p.at(y0 + 1, x0 + 1));
            }
        return out;
    }

    std::vector<Plane> pyramid(const Image& gray) const {
        std::vector<Plane> levels;
        levels.push_back(from_gray(gray));
        while (int(levels.size()) < opt_.max_levels &&
               std::min(levels.back().h, levels.back().w) >= 2 * opt_.min_size)
            levels.push_back(downsample2(levels.back()));
        return levels;
    }

    static float sample(const Plane& p, float fy, float fx) {
        const int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
        const float ay = fy - float(y0), ax = fx - float(x0);
        return (1 - ay) * ((1 - ax) * p.at(y0, x0) + ax * p.at(y0, x0 + 1)) +
               ay * ((1 - ax) * p.at(y0 + 1, x0) + ax * p.at(y0 + 1, x0 + 1));
    }

    // one Lucas-Kanade update at a single pyramid level
    void refine(const Plane& r, const Plane& t, Plane& fx, Plane& fy) const {
        const int h = r.h, w = r.w;
        Plane warped(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                warped.ref(y, x) = sample(t, float(y) + fy.at(y, x), float(x) + fx.at(y, x));

        Plane ix(h, w), iy(h, w), it(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                ix.ref(y, x) = 0.25f * (r.at(y, x + 1) - r.at(y, x - 1) + warped.at(y, x + 1) -
                                        warped.at(y, x - 1));
                iy.ref(y, x) = 0.25f * (r.at(y + 1, x) - r.at(y - 1, x) + warped.at(y + 1, x) -
                                        warped.at(y - 1, x));
                it.ref(y, x) = warped.at(y, x) - r.at(y, x);
            }

        // window sums of the normal equations
        Plane sxx = box(ix, ix), sxy = box(ix, iy), syy = box(iy, iy);
        Plane sxt = box(ix, it), syt = box(iy, it);

        const float lam = float(opt_.damping);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float a = sxx.at(y, x) + lam;
                const float b = sxy.at(y, x);
                const float c = syy.at(y, x) + lam;
                const float det = a * c - b * b;
                if (det <= 1e-12f) continue;
                const float bx = -sxt.at(y, x);
                const float by = -syt.at(y, x);
                float dx = (c * bx - b * by) / det;
                float dy = (a * by - b * bx) / det;
                dx = std::clamp(dx, -2.0f, 2.0f);
                dy = std::clamp(dy, -2.0f, 2.0f);
                fx.ref(y, x) += dx;
                fy.ref(y, x) += dy;
            }
        smooth(fx);
        smooth(fy);
    }

    Plane box(const Plane& a, const Plane& b) const {
        const int rr = opt_.window_radius;
        const int h = a.h, w = a.w;
        Plane prod(h, w), tmp(h, w), out(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) prod.ref(y, x) = a.at(y, x) * b.at(y, x);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float acc = 0.0f;
                for (int i = -rr; i <= rr; ++i) acc += prod.at(y, x + i);
                tmp.ref(y, x) = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float acc = 0.0f;
                for (int i = -rr; i <= rr; ++i) acc += tmp.at(y + i, x);
                out.ref(y, x) = acc;
            }
        return out;
    }

    // light 3x3 smoothing keeps the dense field coherent
    static void smooth(Plane& p) {
        Plane out(p.h, p.w);
        for (int y = 0; y < p.h; ++y)
            for (int x = 0; x < p.w; ++x)
                out.ref(y, x) =
                    0.25f * p.at(y, x) +
                    0.125f * (p.at(y - 1, x) + p.at(y + 1, x) + p.at(y, x - 1) + p.at(y, x + 1)) +
                    0.0625f * (p.at(y - 1, x - 1) + p.at(y - 1, x + 1) + p.at(y + 1, x - 1) +
                               p.at(y + 1, x + 1));
        p = std::move(out);
    }

    Options opt_;
};

inline FlowField estimate_flow(const Image& ref, const Image& tar, const FlowBackend& backend) {
    return backend.estimate(ref, tar);
}

// Resample the target frame into the reference coordinate system:
// I_warp(u,v) = tar(v + Fx(u,v), u + Fy(u,v)), bilinear, border replicate.
inline Image align_frame(const Image& tar, const FlowField& flow) {
    if (flow.h != tar.h || flow.w != tar.w)
        throw std::invalid_argument("align_frame: flow shape does not match frame");
    Image out(tar.h, tar.w, tar.c);
    std::vector<float> px(std::size_t(tar.c));
    for (int u = 0; u < tar.h; ++u)
        for (int v = 0; v < tar.w; ++v) {
            bilinear_fetch(tar, float(v) + flow.fx(u, v), float(u) + flow.fy(u, v), px.data());
            for (int c = 0; c < tar.c; ++c) out.at(u, v, c) = px[c];
        }
    return out;
}

// Backend factory: "classical" is always available; the neural
// correlation-volume estimator would plug in here given pretrained weights.
inline std::unique_ptr<FlowBackend> make_flow_backend(const std::string& kind) {
    if (kind == "classical") return std::make_unique<PyramidalFlowBackend>();
    if (kind == "recurrent")
        throw std::runtime_error(
            "flow backend 'recurrent' needs pretrained weights that are not bundled; use the "
            "'classical' backend");
    throw std::runtime_error("unknown flow backend '" + kind + "' (expected classical|recurrent)");
}

} // namespace i2vwm
