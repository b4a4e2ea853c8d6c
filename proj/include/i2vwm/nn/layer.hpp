#pragma once

#include <memory>
#include <string>
#include <vector>

#include "i2vwm/core/rng.hpp"
#include "i2vwm/core/tensor.hpp"

namespace i2vwm::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n, std::vector<std::int64_t> shape)
        : name(std::move(n)), value(shape), grad(shape) {}

    void zero_grad() { grad.fill(0.0f); }
};

// Activation cache for one forward call. Evaluation passes a null trace and
// stays allocation-pure w.r.t. the layer, so eval forward is const and
// thread-safe; training owns exactly one trace per call.
struct Trace {
    std::vector<Tensor> saved;
    std::vector<std::unique_ptr<Trace>> children;

    Trace* child(std::size_t i) {
        if (children.size() <= i) children.resize(i + 1);
        if (!children[i]) children[i] = std::make_unique<Trace>();
        return children[i].get();
    }
    const Trace& child_at(std::size_t i) const { return *children.at(i); }
};

class Layer {
public:
    virtual ~Layer() = default;

    // tr == nullptr -> pure evaluation forward
    virtual Tensor forward(const Tensor& x, Trace* tr) const = 0;

    // Returns grad w.r.t. input. Accumulates parameter gradients unless
    // param_grads is false (used when a frozen network sits inside a
    // larger graph, e.g. the discriminator during the generator step).
    virtual Tensor backward(const Tensor& gy, const Trace& tr, bool param_grads = true) = 0;

    virtual void collect_params(std::vector<Param*>& /*out*/) {}
    virtual void init(Rng& /*rng*/) {}

    std::vector<Param*> params() {
        std::vector<Param*> out;
        collect_params(out);
        return out;
    }

    void zero_grads() {
        for (Param* p : params()) p->zero_grad();
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (Param* p : params()) n += p->value.numel();
        return n;
    }
};

} // namespace i2vwm::nn
