#pragma once

#include <stdexcept>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/model/jnd.hpp"
#include "i2vwm/model/networks.hpp"

namespace i2vwm {

enum class ResampleMode { Bilinear, Nearest };

struct EmbedParams {
    double alpha = 1.0;      // watermark strength factor
    double jnd_lambda = 1.5; // perceptual-envelope scale
    ResampleMode interpolation = ResampleMode::Bilinear;

    void validate() const {
        if (alpha < 0.0) throw std::invalid_argument("EmbedParams: alpha must be nonnegative");
        if (jnd_lambda < 0.0)
            throw std::invalid_argument("EmbedParams: jnd_lambda must be nonnegative");
    }
};

inline Image resize_nearest(const Image& src, int out_h, int out_w) {
    if (out_h == src.h && out_w == src.w) return src;
    Image dst(out_h, out_w, src.c);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(src.h - 1, int(float(y) * float(src.h) / float(out_h)));
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(src.w - 1, int(float(x) * float(src.w) / float(out_w)));
            for (int c = 0; c < src.c; ++c) dst.at(y, x, c) = src.at(sy, sx, c);
        }
    }
    return dst;
}

inline Image resample(const Image& src, int h, int w, ResampleMode mode) {
    return mode == ResampleMode::Nearest ? resize_nearest(src, h, w) : resize_bilinear(src, h, w);
}

// Full-size watermark residual at unit strength: the encode-and-fuse
// residual computed at native resolution and rescaled to the image size.
// The final embedding is clip(img + alpha * residual).
inline std::vector<float> watermark_residual(const Image& img, const WatermarkMessage& msg,
                                             const EmbedParams& params, const WatermarkModel& model) {
    const int r = model.config().native_resolution;
    const Image low = resample(img, r, r, params.interpolation);
    const WatermarkLatent latent = model.map_message(msg);
    const Image wmimg = model.encode_watermark(low, latent);
    const Image fused = fuse_jnd(low, wmimg, params.jnd_lambda);

    Image res_native(r, r, 3);
    for (std::size_t i = 0; i < res_native.px.size(); ++i)
        res_native.px[i] = fused.px[i] - low.px[i];

    Image res_full(img.h, img.w, 3);
    if (params.interpolation == ResampleMode::Nearest)
        res_full = resize_nearest(res_native, img.h, img.w);
    else
        res_full = resize_bilinear(res_native, img.h, img.w);

    return std::move(res_full.px);
}

// Any-resolution embedding by residual rescaling and aggregation.
inline Image embed_any_resolution(const Image& img, const WatermarkMessage& msg,
                                  const EmbedParams& params, const WatermarkModel& model) {
    check_image(img, "embed_any_resolution");
    params.validate();
    if (int(msg.size()) != model.config().message_length)
        throw std::invalid_argument("embed_any_resolution: message length mismatch");
    if (params.alpha == 0.0) return img;

    const auto residual = watermark_residual(img, msg, params, model);
    Image out = img;
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = clampf(img.px[i] + float(params.alpha) * residual[i], 0.0f, 1.0f);
    return out;
}

// Image extraction mode: rescale to native, decode, binarize.
inline WatermarkMessage extract_from_image(const Image& img, const WatermarkModel& model) {
    check_image(img, "extract_from_image");
    const int r = model.config().native_resolution;
    const Image low = resize_bilinear(img, r, r);
    return model.binarize(model.decode_soft(low));
}

inline std::vector<double> extract_soft_from_image(const Image& img, const WatermarkModel& model) {
    check_image(img, "extract_from_image");
    const int r = model.config().native_resolution;
    return model.decode_soft(resize_bilinear(img, r, r));
}

} // namespace i2vwm
