#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "i2vwm/core/image.hpp"
#include "i2vwm/distortion/noise_layer.hpp"

namespace i2vwm {

struct LossWeights {
    double lambda1 = 1.0;  // encoder MSE
    double lambda2 = 0.1;  // perceptual
    double lambda3 = 0.1;  // adversarial
    double lambda4 = 50.0; // decode MSE

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
            throw std::invalid_argument("LossWeights: weights must be nonnegative");
    }
};

struct LossBreakdown {
    double l_enc = 0.0;
    double l_lpips = 0.0;
    double l_adv = 0.0;
    double l_dec = 0.0;
    double total = 0.0;
};

// Learned-perceptual-distance adapter. The real learned metric is consumed
// through this interface when available; the built-in backends are a
// disabled stub (contributes zero) and a Gaussian-pyramid MSE proxy that
// supplies a differentiable multi-scale signal.
class PerceptualMetricAdapter {
public:
    virtual ~PerceptualMetricAdapter() = default;
    virtual std::string name() const = 0;
    virtual bool enabled() const = 0;

    virtual double distance(const Image& a, const Image& b) const = 0;

    // batch distance with optional gradient w.r.t. `a`
    virtual double distance_batch(const Tensor& a, const Tensor& b, Tensor* grad_a) const = 0;
};

class DisabledPerceptual : public PerceptualMetricAdapter {
public:
    std::string name() const override { return "off"; }
    bool enabled() const override { return false; }
    double distance(const Image&, const Image&) const override { return 0.0; }
    double distance_batch(const Tensor& a, const Tensor&, Tensor* grad_a) const override {
        if (grad_a) *grad_a = Tensor::zeros(a.shape());
        return 0.0;
    }
};

// Mean squared error accumulated over a blurred-and-downsampled pyramid;
// distance(x, x) == 0 and the gradient is the exact adjoint.
class PyramidPerceptual : public PerceptualMetricAdapter {
public:
    explicit PyramidPerceptual(int levels = 3) : levels_(levels) {}

    std::string name() const override { return "pyramid"; }
    bool enabled() const override { return true; }

    double distance(const Image& a, const Image& b) const override {
        if (!a.same_shape(b)) throw std::invalid_argument("perceptual: image shapes must match");
        return distance_batch(image_to_tensor(a), image_to_tensor(b), nullptr);
    }

    double distance_batch(const Tensor& a, const Tensor& b, Tensor* grad_a) const override {
        if (!a.same_shape(b)) throw std::invalid_argument("perceptual: tensor shapes must match");
        if (grad_a) *grad_a = Tensor::zeros(a.shape());
        double total = 0.0;
        Tensor da = a, db = b;
        for (int lvl = 0; lvl < levels_; ++lvl) {
            const std::int64_t numel = da.numel();
            double mse = 0.0;
            Tensor g(da.shape());
            for (std::int64_t i = 0; i < numel; ++i) {
                const double d = double(da[i]) - double(db[i]);
                mse += d * d;
                g[i] = float(2.0 * d / double(numel));
            }
            total += mse / double(numel);
            if (grad_a) {
                // chain the level gradient back through the downsampling stack
                Tensor gl = g;
                for (int up = lvl; up > 0; --up)
                    gl = noise_detail::resize_tensor_adjoint(gl, int(gl.dim(2)) * 2,
                                                             int(gl.dim(3)) * 2);
                *grad_a += gl;
            }
            if (lvl + 1 < levels_) {
                if (da.dim(2) < 8 || da.dim(3) < 8) break;
                da = noise_detail::resize_tensor(da, int(da.dim(2)) / 2, int(da.dim(3)) / 2);
                db = noise_detail::resize_tensor(db, int(db.dim(2)) / 2, int(db.dim(3)) / 2);
            }
        }
        return total;
    }

private:
    int levels_;
};

inline std::unique_ptr<PerceptualMetricAdapter> make_perceptual(const std::string& kind) {
    if (kind == "off") return std::make_unique<DisabledPerceptual>();
    if (kind == "pyramid") return std::make_unique<PyramidPerceptual>();
    if (kind == "lpips")
        throw std::runtime_error(
            "perceptual backend 'lpips' needs an external learned-metric runtime; use 'pyramid' "
            "or 'off'");
    throw std::runtime_error("unknown perceptual backend '" + kind + "' (expected off|pyramid|lpips)");
}

// Composite objective bookkeeping:
//   l_enc  = mean squared pixel error between I_E and I_o
//   l_lpips = adapter distance (zero when the adapter is disabled)
//   l_adv  = mean log(1 - D(I_E))
//   l_dec  = mean squared message error
//   total  = lambda1*l_enc + lambda2*l_lpips + lambda3*l_adv + lambda4*l_dec
inline LossBreakdown compute_losses(const Tensor& original, const Tensor& encoded,
                                    const Tensor& messages, const Tensor& soft,
                                    const Tensor& disc_scores_on_encoded, const LossWeights& weights,
                                    const PerceptualMetricAdapter* perceptual) {
    weights.validate();
    if (!original.same_shape(encoded))
        throw std::invalid_argument("compute_losses: image tensor shapes differ");
    if (!messages.same_shape(soft))
        throw std::invalid_argument("compute_losses: message/soft shapes differ");
    if (perceptual == nullptr)
        throw std::invalid_argument(
            "compute_losses: perceptual adapter unavailable; pass the disabled adapter to opt out");

    LossBreakdown out;
    for (std::int64_t i = 0; i < original.numel(); ++i) {
        const double d = double(encoded[i]) - double(original[i]);
        out.l_enc += d * d;
    }
    out.l_enc /= double(original.numel());

    out.l_lpips = perceptual->enabled()
                      ? perceptual->distance_batch(encoded, original, nullptr)
                      : 0.0;

    for (std::int64_t i = 0; i < disc_scores_on_encoded.numel(); ++i) {
        const double s = std::min(double(disc_scores_on_encoded[i]), 1.0 - 1e-7);
        out.l_adv += std::log(1.0 - s);
    }
    out.l_adv /= double(disc_scores_on_encoded.numel());

    for (std::int64_t i = 0; i < messages.numel(); ++i) {
        const double d = double(soft[i]) - double(messages[i]);
        out.l_dec += d * d;
    }
    out.l_dec /= double(messages.numel());

    out.total = weights.lambda1 * out.l_enc + weights.lambda2 * out.l_lpips +
                weights.lambda3 * out.l_adv + weights.lambda4 * out.l_dec;
    return out;
}

} // namespace i2vwm
