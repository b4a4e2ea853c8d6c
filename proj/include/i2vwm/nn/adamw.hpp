#pragma once

#include <cmath>
#include <vector>

#include "i2vwm/nn/layer.hpp"

namespace i2vwm::nn {

struct AdamWOptions {
    float lr = 1e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.01f;
};

// Adam with decoupled weight decay.
class AdamW {
public:
    using Options = AdamWOptions;

    explicit AdamW(std::vector<Param*> params, Options opt = Options{})
        : params_(std::move(params)), opt_(opt) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (Param* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const float bc1 = 1.0f - std::pow(opt_.beta1, float(t_));
        const float bc2 = 1.0f - std::pow(opt_.beta2, float(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param* p = params_[i];
            float* w = p->value.data();
            const float* g = p->grad.data();
            float* m = m_[i].data();
            float* v = v_[i].data();
            const std::int64_t n = p->value.numel();
            // norm/bias parameters are excluded from weight decay
            const bool decay = p->value.ndim() > 1;
            const float wd = decay ? opt_.weight_decay : 0.0f;
            for (std::int64_t j = 0; j < n; ++j) {
                m[j] = opt_.beta1 * m[j] + (1.0f - opt_.beta1) * g[j];
                v[j] = opt_.beta2 * v[j] + (1.0f - opt_.beta2) * g[j] * g[j];
                const float mhat = m[j] / bc1;
                const float vhat = v[j] / bc2;
                w[j] -= opt_.lr * (mhat / (std::sqrt(vhat) + opt_.eps) + wd * w[j]);
            }
        }
    }

    void set_lr(float lr) { opt_.lr = lr; }
    float lr() const { return opt_.lr; }
    std::int64_t steps() const { return t_; }

private:
    std::vector<Param*> params_;
    Options opt_;
    std::vector<Tensor> m_, v_;
    std::int64_t t_ = 0;
};

} // namespace i2vwm::nn
