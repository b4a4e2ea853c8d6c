#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "i2vwm/core/gemm.hpp"
#include "i2vwm/nn/layer.hpp"

namespace i2vwm::nn {

inline int auto_groups(int channels) {
    for (int g : {8, 4, 2})
        if (channels % g == 0) return g;
    return 1;
}

namespace detail {

// Patch matrix for output rows [ho0, ho1); keeping the tile small enough
// for L2 avoids a DRAM roundtrip on full-resolution layers.
inline void im2col_rows(const float* x, std::int64_t C, std::int64_t H, std::int64_t W, int k,
                        int stride, int pad, std::int64_t Wo, std::int64_t ho0, std::int64_t ho1,
                        float* col) {
    const std::int64_t rows = ho1 - ho0;
    for (std::int64_t c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                float* dst = col + ((c * k + ki) * k + kj) * rows * Wo;
                for (std::int64_t ho = ho0; ho < ho1; ++ho) {
                    const std::int64_t hi = ho * stride - pad + ki;
                    if (hi < 0 || hi >= H) {
                        std::fill(dst, dst + Wo, 0.0f);
                        dst += Wo;
                        continue;
                    }
                    const float* src = x + (c * H + hi) * W;
                    std::int64_t wi = -pad + kj;
                    if (stride == 1 && wi >= 0 && wi + Wo <= W) {
                        std::copy(src + wi, src + wi + Wo, dst);
                        dst += Wo;
                    } else {
                        for (std::int64_t wo = 0; wo < Wo; ++wo, wi += stride)
                            *dst++ = (wi >= 0 && wi < W) ? src[wi] : 0.0f;
                    }
                }
            }
        }
    }
}

inline void col2im_rows(const float* col, std::int64_t C, std::int64_t H, std::int64_t W, int k,
                        int stride, int pad, std::int64_t Wo, std::int64_t ho0, std::int64_t ho1,
                        float* x) {
    const std::int64_t rows = ho1 - ho0;
    for (std::int64_t c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const float* src = col + ((c * k + ki) * k + kj) * rows * Wo;
                for (std::int64_t ho = ho0; ho < ho1; ++ho) {
                    const std::int64_t hi = ho * stride - pad + ki;
                    if (hi < 0 || hi >= H) {
                        src += Wo;
                        continue;
                    }
                    float* dst = x + (c * H + hi) * W;
                    std::int64_t wi = -pad + kj;
                    for (std::int64_t wo = 0; wo < Wo; ++wo, wi += stride)
                        if (wi >= 0 && wi < W) dst[wi] += src[wo];
                    src += Wo;
                }
            }
        }
    }
}

// rows per tile so the patch matrix stays within ~1 MiB
inline std::int64_t conv_tile_rows(std::int64_t ckk, std::int64_t Wo, std::int64_t Ho) {
    const std::int64_t budget = (1 << 20) / 4;
    std::int64_t rows = budget / std::max<std::int64_t>(1, ckk * Wo);
    return std::clamp<std::int64_t>(rows, 1, Ho);
}

} // namespace detail

class Conv2d : public Layer {
public:
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride = 1, int pad = -1,
           bool depthwise = false, float init_scale = 1.0f)
        : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride),
          pad_(pad < 0 ? kernel / 2 : pad), depthwise_(depthwise), init_scale_(init_scale),
          weight_(name + ".weight",
                  depthwise ? std::vector<std::int64_t>{out_c, 1, kernel, kernel}
                            : std::vector<std::int64_t>{out_c, in_c, kernel, kernel}),
          bias_(name + ".bias", {out_c}) {
        if (depthwise && in_c != out_c)
            throw std::invalid_argument("Conv2d: depthwise requires in_c == out_c");
    }

    void init(Rng& rng) override {
        const std::int64_t fan_in = depthwise_ ? std::int64_t(k_) * k_ : std::int64_t(in_c_) * k_ * k_;
        const float bound = std::sqrt(6.0f / float(fan_in)) * init_scale_;
        for (auto& v : weight_.value.vec()) v = float(rng.uniform(-bound, bound));
        bias_.value.fill(0.0f);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        const auto [N, C, H, W] = dims(x);
        const std::int64_t Ho = (H + 2 * pad_ - k_) / stride_ + 1;
        const std::int64_t Wo = (W + 2 * pad_ - k_) / stride_ + 1;
        Tensor y({N, out_c_, Ho, Wo});
        if (depthwise_) {
            forward_depthwise(x, y, N, C, H, W, Ho, Wo);
        } else if (k_ == 1 && stride_ == 1 && pad_ == 0) {
            for (std::int64_t n = 0; n < N; ++n)
                gemm(false, false, out_c_, Ho * Wo, in_c_, 1.0f, weight_.value.data(), in_c_,
                     x.data() + n * C * H * W, Ho * Wo, 0.0f, y.data() + n * out_c_ * Ho * Wo,
                     Ho * Wo);
        } else {
            const std::int64_t ckk = std::int64_t(in_c_) * k_ * k_;
            const std::int64_t tile = detail::conv_tile_rows(ckk, Wo, Ho);
            std::vector<float> col(std::size_t(ckk * tile * Wo));
            std::vector<float> ytile(std::size_t(out_c_ * tile * Wo));
            for (std::int64_t n = 0; n < N; ++n) {
                const float* xn = x.data() + n * C * H * W;
                float* yn = y.data() + n * out_c_ * Ho * Wo;
                for (std::int64_t ho = 0; ho < Ho; ho += tile) {
                    const std::int64_t hoe = std::min(Ho, ho + tile);
                    const std::int64_t rows = hoe - ho;
                    detail::im2col_rows(xn, C, H, W, k_, stride_, pad_, Wo, ho, hoe, col.data());
                    gemm(false, false, out_c_, rows * Wo, ckk, 1.0f, weight_.value.data(), ckk,
                         col.data(), rows * Wo, 0.0f, ytile.data(), rows * Wo);
                    for (std::int64_t oc = 0; oc < out_c_; ++oc)
                        std::copy(ytile.data() + oc * rows * Wo, ytile.data() + (oc + 1) * rows * Wo,
                                  yn + oc * Ho * Wo + ho * Wo);
                }
            }
        }
        // bias
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t oc = 0; oc < out_c_; ++oc) {
                float* dst = y.data() + (n * out_c_ + oc) * Ho * Wo;
                const float b = bias_.value[oc];
                for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] += b;
            }
        if (tr) tr->saved = {x};
        return y;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        const Tensor& x = tr.saved.at(0);
        const auto [N, C, H, W] = dims(x);
        const std::int64_t Ho = gy.dim(2), Wo = gy.dim(3);
        Tensor gx({N, C, H, W});

        if (param_grads) {
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t oc = 0; oc < out_c_; ++oc) {
                    const float* src = gy.data() + (n * out_c_ + oc) * Ho * Wo;
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += src[i];
                    bias_.grad[oc] += float(acc);
                }
        }

        if (depthwise_) {
            backward_depthwise(gy, x, gx, param_grads);
            return gx;
        }
        if (k_ == 1 && stride_ == 1 && pad_ == 0) {
            for (std::int64_t n = 0; n < N; ++n) {
                const float* gyn = gy.data() + n * out_c_ * Ho * Wo;
                if (param_grads)
                    gemm(false, true, out_c_, in_c_, Ho * Wo, 1.0f, gyn, Ho * Wo,
                         x.data() + n * C * H * W, Ho * Wo, 1.0f, weight_.grad.data(), in_c_);
                gemm(true, false, in_c_, Ho * Wo, out_c_, 1.0f, weight_.value.data(), in_c_, gyn,
                     Ho * Wo, 1.0f, gx.data() + n * C * H * W, Ho * Wo);
            }
            return gx;
        }
        const std::int64_t ckk = std::int64_t(in_c_) * k_ * k_;
        const std::int64_t tile = detail::conv_tile_rows(ckk, Wo, Ho);
        std::vector<float> col(std::size_t(ckk * tile * Wo));
        std::vector<float> dcol(std::size_t(ckk * tile * Wo));
        std::vector<float> gtile(std::size_t(out_c_ * tile * Wo));
        for (std::int64_t n = 0; n < N; ++n) {
            const float* xn = x.data() + n * C * H * W;
            const float* gyn = gy.data() + n * out_c_ * Ho * Wo;
            for (std::int64_t ho = 0; ho < Ho; ho += tile) {
                const std::int64_t hoe = std::min(Ho, ho + tile);
                const std::int64_t rows = hoe - ho;
                for (std::int64_t oc = 0; oc < out_c_; ++oc)
                    std::copy(gyn + oc * Ho * Wo + ho * Wo, gyn + oc * Ho * Wo + hoe * Wo,
                              gtile.data() + oc * rows * Wo);
                if (param_grads) {
                    detail::im2col_rows(xn, C, H, W, k_, stride_, pad_, Wo, ho, hoe, col.data());
                    gemm(false, true, out_c_, ckk, rows * Wo, 1.0f, gtile.data(), rows * Wo,
                         col.data(), rows * Wo, 1.0f, weight_.grad.data(), ckk);
                }
                gemm(true, false, ckk, rows * Wo, out_c_, 1.0f, weight_.value.data(), ckk,
                     gtile.data(), rows * Wo, 0.0f, dcol.data(), rows * Wo);
                detail::col2im_rows(dcol.data(), C, H, W, k_, stride_, pad_, Wo, ho, hoe,
                                    gx.data() + n * C * H * W);
            }
        }
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    static std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t> dims(const Tensor& x) {
        if (x.ndim() != 4) throw std::invalid_argument("Conv2d: expected NCHW input");
        return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    }

    void forward_depthwise(const Tensor& x, Tensor& y, std::int64_t N, std::int64_t C,
                           std::int64_t H, std::int64_t W, std::int64_t Ho, std::int64_t Wo) const {
        if (stride_ == 1) {
            // tap-outer accumulation: every inner loop is a contiguous axpy
            for (std::int64_t nc = 0; nc < N * C; ++nc) {
                const float* xs = x.data() + nc * H * W;
                const float* wk = weight_.value.data() + (nc % C) * k_ * k_;
                float* ys = y.data() + nc * Ho * Wo;
                std::fill(ys, ys + Ho * Wo, 0.0f);
                for (int ki = 0; ki < k_; ++ki)
                    for (int kj = 0; kj < k_; ++kj) {
                        const float wv = wk[ki * k_ + kj];
                        const std::int64_t wlo = std::max<std::int64_t>(0, pad_ - kj);
                        const std::int64_t whi = std::min<std::int64_t>(Wo, W + pad_ - kj);
                        if (whi <= wlo) continue;
                        for (std::int64_t ho = 0; ho < Ho; ++ho) {
                            const std::int64_t hi = ho - pad_ + ki;
                            if (hi < 0 || hi >= H) continue;
                            const float* xrow = xs + hi * W + (wlo - pad_ + kj);
                            float* yrow = ys + ho * Wo + wlo;
                            for (std::int64_t i = 0; i < whi - wlo; ++i) yrow[i] += wv * xrow[i];
                        }
                    }
            }
            return;
        }
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t c = 0; c < C; ++c) {
                const float* xs = x.data() + (n * C + c) * H * W;
                const float* wk = weight_.value.data() + c * k_ * k_;
                float* ys = y.data() + (n * C + c) * Ho * Wo;
                for (std::int64_t ho = 0; ho < Ho; ++ho)
                    for (std::int64_t wo = 0; wo < Wo; ++wo) {
                        float acc = 0.0f;
                        for (int ki = 0; ki < k_; ++ki) {
                            const std::int64_t hi = ho * stride_ - pad_ + ki;
                            if (hi < 0 || hi >= H) continue;
                            for (int kj = 0; kj < k_; ++kj) {
                                const std::int64_t wi = wo * stride_ - pad_ + kj;
                                if (wi < 0 || wi >= W) continue;
                                acc += wk[ki * k_ + kj] * xs[hi * W + wi];
                            }
                        }
                        ys[ho * Wo + wo] = acc;
                    }
            }
    }

    void backward_depthwise(const Tensor& gy, const Tensor& x, Tensor& gx, bool param_grads) {
        const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        const std::int64_t Ho = gy.dim(2), Wo = gy.dim(3);
        if (stride_ == 1) {
            for (std::int64_t nc = 0; nc < N * C; ++nc) {
                const std::int64_t c = nc % C;
                const float* xs = x.data() + nc * H * W;
                const float* gys = gy.data() + nc * Ho * Wo;
                const float* wk = weight_.value.data() + c * k_ * k_;
                float* gw = weight_.grad.data() + c * k_ * k_;
                float* gxs = gx.data() + nc * H * W;
                for (int ki = 0; ki < k_; ++ki)
                    for (int kj = 0; kj < k_; ++kj) {
                        const float wv = wk[ki * k_ + kj];
                        const std::int64_t wlo = std::max<std::int64_t>(0, pad_ - kj);
                        const std::int64_t whi = std::min<std::int64_t>(Wo, W + pad_ - kj);
                        if (whi <= wlo) continue;
                        float acc = 0.0f;
                        for (std::int64_t ho = 0; ho < Ho; ++ho) {
                            const std::int64_t hi = ho - pad_ + ki;
                            if (hi < 0 || hi >= H) continue;
                            const float* xrow = xs + hi * W + (wlo - pad_ + kj);
                            float* gxrow = gxs + hi * W + (wlo - pad_ + kj);
                            const float* grow = gys + ho * Wo + wlo;
                            if (param_grads) {
                                float dot = 0.0f;
                                for (std::int64_t i = 0; i < whi - wlo; ++i) {
                                    dot += grow[i] * xrow[i];
                                    gxrow[i] += wv * grow[i];
                                }
                                acc += dot;
                            } else {
                                for (std::int64_t i = 0; i < whi - wlo; ++i)
                                    gxrow[i] += wv * grow[i];
                            }
                        }
                        if (param_grads) gw[ki * k_ + kj] += acc;
                    }
            }
            return;
        }
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t c = 0; c < C; ++c) {
                const float* xs = x.data() + (n * C + c) * H * W;
                const float* gys = gy.data() + (n * C + c) * Ho * Wo;
                const float* wk = weight_.value.data() + c * k_ * k_;
                float* gw = weight_.grad.data() + c * k_ * k_;
                float* gxs = gx.data() + (n * C + c) * H * W;
                for (std::int64_t ho = 0; ho < Ho; ++ho)
                    for (std::int64_t wo = 0; wo < Wo; ++wo) {
                        const float g = gys[ho * Wo + wo];
                        if (g == 0.0f) continue;
                        for (int ki = 0; ki < k_; ++ki) {
                            const std::int64_t hi = ho * stride_ - pad_ + ki;
                            if (hi < 0 || hi >= H) continue;
                            for (int kj = 0; kj < k_; ++kj) {
                                const std::int64_t wi = wo * stride_ - pad_ + kj;
                                if (wi < 0 || wi >= W) continue;
                                if (param_grads) gw[ki * k_ + kj] += g * xs[hi * W + wi];
                                gxs[hi * W + wi] += g * wk[ki * k_ + kj];
                            }
                        }
                    }
            }
    }

    std::int64_t in_c_, out_c_;
    int k_, stride_, pad_;
    bool depthwise_;
    float init_scale_;
    Param weight_;
    Param bias_;
};

class Linear : public Layer {
public:
    Linear(std::string name, int in_f, int out_f, float init_scale = 1.0f)
        : in_f_(in_f), out_f_(out_f), init_scale_(init_scale),
          weight_(name + ".weight", {out_f, in_f}), bias_(name + ".bias", {out_f}) {}

    void init(Rng& rng) override {
        const float bound = std::sqrt(6.0f / float(in_f_ + out_f_)) * init_scale_;
        for (auto& v : weight_.value.vec()) v = float(rng.uniform(-bound, bound));
        bias_.value.fill(0.0f);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        if (x.ndim() != 2 || x.dim(1) != in_f_)
            throw std::invalid_argument("Linear: bad input shape " + shape_str(x.shape()));
        const std::int64_t N = x.dim(0);
        Tensor y({N, out_f_});
        gemm(false, true, N, out_f_, in_f_, 1.0f, x.data(), in_f_, weight_.value.data(), in_f_, 0.0f,
             y.data(), out_f_);
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t o = 0; o < out_f_; ++o) y[n * out_f_ + o] += bias_.value[o];
        if (tr) tr->saved = {x};
        return y;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        const Tensor& x = tr.saved.at(0);
        const std::int64_t N = x.dim(0);
        if (param_grads) {
            gemm(true, false, out_f_, in_f_, N, 1.0f, gy.data(), out_f_, x.data(), in_f_, 1.0f,
                 weight_.grad.data(), in_f_);
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t o = 0; o < out_f_; ++o) bias_.grad[o] += gy[n * out_f_ + o];
        }
        Tensor gx({N, in_f_});
        gemm(false, false, N, in_f_, out_f_, 1.0f, gy.data(), out_f_, weight_.value.data(), in_f_,
             0.0f, gx.data(), in_f_);
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    std::int64_t in_f_, out_f_;
    float init_scale_;
    Param weight_;
    Param bias_;
};

// GroupNorm over (C/g, H, W) per sample-group. Batch-independent, so train
// and single-image eval statistics agree.
class GroupNorm : public Layer {
public:
    GroupNorm(std::string name, int channels, int groups = 0, float eps = 1e-5f)
        : c_(channels), g_(groups > 0 ? groups : auto_groups(channels)), eps_(eps),
          gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}) {
        if (c_ % g_ != 0) throw std::invalid_argument("GroupNorm: groups must divide channels");
        gamma_.value.fill(1.0f);
    }

    void init(Rng&) override {
        gamma_.value.fill(1.0f);
        beta_.value.fill(0.0f);
    }

    static void lane_sums(const float* xs, std::int64_t m, double& out_sum, double& out_sumsq) {
        float s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        float q[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        const std::int64_t m8 = m - m % 8;
        for (std::int64_t i = 0; i < m8; i += 8)
            for (int l = 0; l < 8; ++l) {
                s[l] += xs[i + l];
                q[l] += xs[i + l] * xs[i + l];
            }
        double sum = 0.0, sumsq = 0.0;
        for (int l = 0; l < 8; ++l) {
            sum += s[l];
            sumsq += q[l];
        }
        for (std::int64_t i = m8; i < m; ++i) {
            sum += xs[i];
            sumsq += double(xs[i]) * xs[i];
        }
        out_sum = sum;
        out_sumsq = sumsq;
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        const std::int64_t cpg = C / g_, m = cpg * H * W;
        Tensor y(x.shape());
        Tensor xhat(x.shape());
        Tensor rstd({N, g_});
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t g = 0; g < g_; ++g) {
                const float* xs = x.data() + (n * C + g * cpg) * H * W;
                double sum = 0.0, sumsq = 0.0;
                lane_sums(xs, m, sum, sumsq);
                const double mu = sum / double(m);
                const double var = std::max(0.0, sumsq / double(m) - mu * mu);
                const float rs = 1.0f / std::sqrt(float(var) + eps_);
                rstd[n * g_ + g] = rs;
                float* xh = xhat.data() + (n * C + g * cpg) * H * W;
                float* ys = y.data() + (n * C + g * cpg) * H * W;
                for (std::int64_t cc = 0; cc < cpg; ++cc) {
                    const float ga = gamma_.value[g * cpg + cc], be = beta_.value[g * cpg + cc];
                    for (std::int64_t i = 0; i < H * W; ++i) {
                        const float v = (xs[cc * H * W + i] - float(mu)) * rs;
                        xh[cc * H * W + i] = v;
                        ys[cc * H * W + i] = ga * v + be;
                    }
                }
            }
        if (tr) tr->saved = {xhat, rstd};
        return y;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        const Tensor& xhat = tr.saved.at(0);
        const Tensor& rstd = tr.saved.at(1);
        const std::int64_t N = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
        const std::int64_t cpg = C / g_, m = cpg * H * W;
        Tensor gx(gy.shape());
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t g = 0; g < g_; ++g) {
                const float* gys = gy.data() + (n * C + g * cpg) * H * W;
                const float* xh = xhat.data() + (n * C + g * cpg) * H * W;
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::int64_t cc = 0; cc < cpg; ++cc) {
                    const float ga = gamma_.value[g * cpg + cc];
                    const float* gp = gys + cc * H * W;
                    const float* xp = xh + cc * H * W;
                    float s0 = 0, s1 = 0;
                    for (std::int64_t i = 0; i < H * W; ++i) {
                        const float dxh = gp[i] * ga;
                        s0 += dxh;
                        s1 += dxh * xp[i];
                    }
                    sum_dxhat += s0;
                    sum_dxhat_xhat += s1;
                }
                const float mean_dxhat = float(sum_dxhat / double(m));
                const float mean_dxhat_xhat = float(sum_dxhat_xhat / double(m));
                const float rs = rstd[n * g_ + g];
                float* gxs = gx.data() + (n * C + g * cpg) * H * W;
                for (std::int64_t cc = 0; cc < cpg; ++cc) {
                    const float ga = gamma_.value[g * cpg + cc];
                    for (std::int64_t i = 0; i < H * W; ++i) {
                        const float dxh = gys[cc * H * W + i] * ga;
                        gxs[cc * H * W + i] =
                            rs * (dxh - mean_dxhat - xh[cc * H * W + i] * mean_dxhat_xhat);
                    }
                }
                if (param_grads)
                    for (std::int64_t cc = 0; cc < cpg; ++cc) {
                        double dg = 0.0, db = 0.0;
                        for (std::int64_t i = 0; i < H * W; ++i) {
                            dg += double(gys[cc * H * W + i]) * xh[cc * H * W + i];
                            db += gys[cc * H * W + i];
                        }
                        gamma_.grad[g * cpg + cc] += float(dg);
                        beta_.grad[g * cpg + cc] += float(db);
                    }
            }
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    std::int64_t c_, g_;
    float eps_;
    Param gamma_, beta_;
};

// LayerNorm across channels at each spatial location (ConvNeXt style).
class ChannelLayerNorm : public Layer {
public:
    ChannelLayerNorm(std::string name, int channels, float eps = 1e-6f)
        : c_(channels), eps_(eps), gamma_(name + ".gamma", {channels}),
          beta_(name + ".beta", {channels}) {
        gamma_.value.fill(1.0f);
    }

    void init(Rng&) override {
        gamma_.value.fill(1.0f);
        beta_.value.fill(0.0f);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        const std::int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
        Tensor y(x.shape());
        Tensor xhat(x.shape());
        Tensor rstd({N, HW});
        for (std::int64_t n = 0; n < N; ++n) {
            const float* xs = x.data() + n * C * HW;
            float* xh = xhat.data() + n * C * HW;
            float* ys = y.data() + n * C * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                double mu = 0.0;
                for (std::int64_t c = 0; c < C; ++c) mu += xs[c * HW + i];
                mu /= double(C);
                double var = 0.0;
                for (std::int64_t c = 0; c < C; ++c) {
                    const double d = xs[c * HW + i] - mu;
                    var += d * d;
                }
                var /= double(C);
                const float rs = 1.0f / std::sqrt(float(var) + eps_);
                rstd[n * HW + i] = rs;
                for (std::int64_t c = 0; c < C; ++c) {
                    const float v = (xs[c * HW + i] - float(mu)) * rs;
                    xh[c * HW + i] = v;
                    ys[c * HW + i] = gamma_.value[c] * v + beta_.value[c];
                }
            }
        }
        if (tr) tr->saved = {xhat, rstd};
        return y;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        const Tensor& xhat = tr.saved.at(0);
        const Tensor& rstd = tr.saved.at(1);
        const std::int64_t N = gy.dim(0), C = gy.dim(1), HW = gy.dim(2) * gy.dim(3);
        Tensor gx(gy.shape());
        for (std::int64_t n = 0; n < N; ++n) {
            const float* gys = gy.data() + n * C * HW;
            const float* xh = xhat.data() + n * C * HW;
            float* gxs = gx.data() + n * C * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (std::int64_t c = 0; c < C; ++c) {
                    const float dxh = gys[c * HW + i] * gamma_.value[c];
                    sum_dxh += dxh;
                    sum_dxh_xh += double(dxh) * xh[c * HW + i];
                }
                const float mean_dxh = float(sum_dxh / double(C));
                const float mean_dxh_xh = float(sum_dxh_xh / double(C));
                const float rs = rstd[n * HW + i];
                for (std::int64_t c = 0; c < C; ++c) {
                    const float dxh = gys[c * HW + i] * gamma_.value[c];
                    gxs[c * HW + i] = rs * (dxh - mean_dxh - xh[c * HW + i] * mean_dxh_xh);
                }
            }
            if (param_grads)
                for (std::int64_t c = 0; c < C; ++c) {
                    double dg = 0.0, db = 0.0;
                    for (std::int64_t i = 0; i < HW; ++i) {
                        dg += double(gys[c * HW + i]) * xh[c * HW + i];
                        db += gys[c * HW + i];
                    }
                    gamma_.grad[c] += float(dg);
                    beta_.grad[c] += float(db);
                }
        }
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    std::int64_t c_;
    float eps_;
    Param gamma_, beta_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor y = x;
        for (auto& v : y.vec())
            if (v < 0.0f) v = 0.0f;
        if (tr) tr->saved = {y};
        return y;
    }
    Tensor backward(const Tensor& gy, const Trace& tr, bool = true) override {
        const Tensor& y = tr.saved.at(0);
        Tensor gx = gy;
        for (std::int64_t i = 0; i < gx.numel(); ++i)
            if (y[i] <= 0.0f) gx[i] = 0.0f;
        return gx;
    }
};

class Gelu : public Layer {
public:
    static float value(float x) {
        const float u = 0.7978845608f * (x + 0.044715f * x * x * x);
        return 0.5f * x * (1.0f + std::tanh(u));
    }
    static float slope(float x) {
        const float u = 0.7978845608f * (x + 0.044715f * x * x * x);
        const float t = std::tanh(u);
        const float du = 0.7978845608f * (1.0f + 3.0f * 0.044715f * x * x);
        return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
    }
    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor y(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = value(x[i]);
        if (tr) tr->saved = {x};
        return y;
    }
    Tensor backward(const Tensor& gy, const Trace& tr, bool = true) override {
        const Tensor& x = tr.saved.at(0);
        Tensor gx(gy.shape());
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] = gy[i] * slope(x[i]);
        return gx;
    }
};

class Sigmoid : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor y(x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
        if (tr) tr->saved = {y};
        return y;
    }
    Tensor backward(const Tensor& gy, const Trace& tr, bool = true) override {
        const Tensor& y = tr.saved.at(0);
        Tensor gx(gy.shape());
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] = gy[i] * y[i] * (1.0f - y[i]);
        return gx;
    }
};

class UpsampleNearest2x : public Layer {
public:
    Tensor forward(const Tensor& x, Trace*) const override {
        const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        Tensor y({N, C, H * 2, W * 2});
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            const float* xs = x.data() + nc * H * W;
            float* ys = y.data() + nc * 4 * H * W;
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t w = 0; w < W; ++w) {
                    const float v = xs[h * W + w];
                    float* d = ys + (2 * h) * (2 * W) + 2 * w;
                    d[0] = v;
                    d[1] = v;
                    d[2 * W] = v;
                    d[2 * W + 1] = v;
                }
        }
        return y;
    }
    Tensor backward(const Tensor& gy, const Trace&, bool = true) override {
        const std::int64_t N = gy.dim(0), C = gy.dim(1), H2 = gy.dim(2), W2 = gy.dim(3);
        const std::int64_t H = H2 / 2, W = W2 / 2;
        Tensor gx({N, C, H, W});
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            const float* gs = gy.data() + nc * H2 * W2;
            float* d = gx.data() + nc * H * W;
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t w = 0; w < W; ++w)
                    d[h * W + w] = gs[(2 * h) * W2 + 2 * w] + gs[(2 * h) * W2 + 2 * w + 1] +
                                   gs[(2 * h + 1) * W2 + 2 * w] + gs[(2 * h + 1) * W2 + 2 * w + 1];
        }
        return gx;
    }
};

// (N,C,H,W) -> (N,C)
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* tr) const override {
        const std::int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
        Tensor y({N, C});
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            const float* xs = x.data() + nc * HW;
            double acc = 0.0;
            for (std::int64_t i = 0; i < HW; ++i) acc += xs[i];
            y[nc] = float(acc / double(HW));
        }
        if (tr) {
            Tensor shape_probe({4});
            shape_probe[0] = float(N);
            shape_probe[1] = float(C);
            shape_probe[2] = float(x.dim(2));
            shape_probe[3] = float(x.dim(3));
            tr->saved = {shape_probe};
        }
        return y;
    }
    Tensor backward(const Tensor& gy, const Trace& tr, bool = true) override {
        const Tensor& s = tr.saved.at(0);
        const std::int64_t N = std::int64_t(s[0]), C = std::int64_t(s[1]), H = std::int64_t(s[2]),
                           W = std::int64_t(s[3]);
        Tensor gx({N, C, H, W});
        const float inv = 1.0f / float(H * W);
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
            const float g = gy[nc] * inv;
            float* d = gx.data() + nc * H * W;
            for (std::int64_t i = 0; i < H * W; ++i) d[i] = g;
        }
        return gx;
    }
};

class Sequential : public Layer {
public:
    Sequential() = default;

    Sequential& add(std::unique_ptr<Layer> l) {
        layers_.push_back(std::move(l));
        return *this;
    }
    template <typename L, typename... Args> Sequential& emplace(Args&&... args) {
        layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
        return *this;
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor cur = x;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            cur = layers_[i]->forward(cur, tr ? tr->child(i) : nullptr);
        return cur;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        Tensor cur = gy;
        for (std::size_t i = layers_.size(); i-- > 0;)
            cur = layers_[i]->backward(cur, tr.child_at(i), param_grads);
        return cur;
    }

    void collect_params(std::vector<Param*>& out) override {
        for (auto& l : layers_) l->collect_params(out);
    }
    void init(Rng& rng) override {
        for (auto& l : layers_) l->init(rng);
    }

    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// y = relu(x + F(x)) with F = conv-gn-relu-conv-gn
class ResidualBlock : public Layer {
public:
    ResidualBlock(const std::string& name, int channels) {
        inner_.emplace<Conv2d>(name + ".conv1", channels, channels, 3);
        inner_.emplace<GroupNorm>(name + ".gn1", channels);
        inner_.emplace<ReLU>();
        inner_.emplace<Conv2d>(name + ".conv2", channels, channels, 3);
        inner_.emplace<GroupNorm>(name + ".gn2", channels);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor t = inner_.forward(x, tr ? tr->child(0) : nullptr);
        t += x;
        for (auto& v : t.vec())
            if (v < 0.0f) v = 0.0f;
        if (tr) tr->saved = {t};
        return t;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        const Tensor& y = tr.saved.at(0);
        Tensor dz = gy;
        for (std::int64_t i = 0; i < dz.numel(); ++i)
            if (y[i] <= 0.0f) dz[i] = 0.0f;
        Tensor gx = inner_.backward(dz, tr.child_at(0), param_grads);
        gx += dz;
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override { inner_.collect_params(out); }
    void init(Rng& rng) override { inner_.init(rng); }

private:
    Sequential inner_;
};

// ConvNeXt-style block: dw7x7 -> LN(channel) -> 1x1 expand -> GELU -> 1x1 project, skip.
class ConvNeXtBlock : public Layer {
public:
    ConvNeXtBlock(const std::string& name, int channels, int expansion = 4) {
        inner_.emplace<Conv2d>(name + ".dwconv", channels, channels, 7, 1, 3, /*depthwise=*/true);
        inner_.emplace<ChannelLayerNorm>(name + ".norm", channels);
        inner_.emplace<Conv2d>(name + ".pw1", channels, channels * expansion, 1, 1, 0);
        inner_.emplace<Gelu>();
        inner_.emplace<Conv2d>(name + ".pw2", channels * expansion, channels, 1, 1, 0);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor t = inner_.forward(x, tr ? tr->child(0) : nullptr);
        t += x;
        return t;
    }

    Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) override {
        Tensor gx = inner_.backward(gy, tr.child_at(0), param_grads);
        gx += gy;
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override { inner_.collect_params(out); }
    void init(Rng& rng) override { inner_.init(rng); }

private:
    Sequential inner_;
};

// Channel concatenation helpers for fusion inputs.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const std::int64_t N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    if (b.dim(0) != N || b.dim(2) != H || b.dim(3) != W)
        throw std::invalid_argument("concat_channels: shape mismatch");
    Tensor y({N, Ca + Cb, H, W});
    const std::int64_t plane = H * W;
    for (std::int64_t n = 0; n < N; ++n) {
        std::copy(a.data() + n * Ca * plane, a.data() + (n + 1) * Ca * plane,
                  y.data() + n * (Ca + Cb) * plane);
        std::copy(b.data() + n * Cb * plane, b.data() + (n + 1) * Cb * plane,
                  y.data() + (n * (Ca + Cb) + Ca) * plane);
    }
    return y;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& y, std::int64_t ca) {
    const std::int64_t N = y.dim(0), C = y.dim(1), H = y.dim(2), W = y.dim(3);
    const std::int64_t cb = C - ca;
    Tensor a({N, ca, H, W}), b({N, cb, H, W});
    const std::int64_t plane = H * W;
    for (std::int64_t n = 0; n < N; ++n) {
        std::copy(y.data() + n * C * plane, y.data() + (n * C + ca) * plane, a.data() + n * ca * plane);
        std::copy(y.data() + (n * C + ca) * plane, y.data() + (n + 1) * C * plane,
                  b.data() + n * cb * plane);
    }
    return {std::move(a), std::move(b)};
}

} // namespace i2vwm::nn
