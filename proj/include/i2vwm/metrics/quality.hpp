#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "i2vwm/core/image.hpp"

namespace i2vwm {

// Peak signal-to-noise ratio in dB with peak value 1.0, capped at 100 dB
// for identical images.
inline double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes must match");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) {
        const double d = double(a.px[i]) - double(b.px[i]);
        mse += d * d;
    }
    mse /= double(a.px.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

namespace ssim_detail {

// 11x11 Gaussian window, sigma 1.5, normalized.
inline std::vector<double> window() {
    std::vector<double> w(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = double(i - 5);
        w[std::size_t(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[std::size_t(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Separable valid-region Gaussian filter of one channel.
inline std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                        const std::vector<double>& win, int& oh, int& ow) {
    const int k = int(win.size());
    const int half = k / 2;
    oh = h - 2 * half;
    ow = w - 2 * half;
    std::vector<double> tmp(std::size_t(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += win[std::size_t(i)] * img[std::size_t(y) * w + x + i];
            tmp[std::size_t(y) * ow + x] = acc;
        }
    std::vector<double> out(std::size_t(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += win[std::size_t(i)] * tmp[std::size_t(y + i) * ow + x];
            out[std::size_t(y) * ow + x] = acc;
        }
    return out;
}

} // namespace ssim_detail

// Standard windowed SSIM (Gaussian 11x11 sigma 1.5, K1=0.01, K2=0.03,
// peak 1.0), averaged over channels and the valid region.
inline double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: image shapes must match");
    if (a.h < 11 || a.w < 11) throw std::invalid_argument("ssim: images must be at least 11x11");
    const auto win = ssim_detail::window();
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double total = 0.0;
    for (int ch = 0; ch < a.c; ++ch) {
        const std::size_t n = std::size_t(a.h) * a.w;
        std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                const double va = a.at(y, x, ch);
                const double vb = b.at(y, x, ch);
                const std::size_t i = std::size_t(y) * a.w + x;
                pa[i] = va;
                pb[i] = vb;
                paa[i] = va * va;
                pbb[i] = vb * vb;
                pab[i] = va * vb;
            }
        int oh = 0, ow = 0;
        const auto mua = ssim_detail::filter_valid(pa, a.h, a.w, win, oh, ow);
        const auto mub = ssim_detail::filter_valid(pb, a.h, a.w, win, oh, ow);
        const auto saa = ssim_detail::filter_valid(paa, a.h, a.w, win, oh, ow);
        const auto sbb = ssim_detail::filter_valid(pbb, a.h, a.w, win, oh, ow);
        const auto sab = ssim_detail::filter_valid(pab, a.h, a.w, win, oh, ow);
        double acc = 0.0;
        for (std::size_t i = 0; i < mua.size(); ++i) {
            const double va = saa[i] - mua[i] * mua[i];
            const double vb = sbb[i] - mub[i] * mub[i];
            const double cov = sab[i] - mua[i] * mub[i];
            const double num = (2.0 * mua[i] * mub[i] + c1) * (2.0 * cov + c2);
            const double den = (mua[i] * mua[i] + mub[i] * mub[i] + c1) * (va + vb + c2);
            acc += num / den;
        }
        total += acc / double(mua.size());
    }
    return total / double(a.c);
}

} // namespace i2vwm
