#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/rng.hpp"

namespace i2vwm {

// Dense float32 tensor, contiguous row-major. Network code uses NCHW.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(numel_of(shape_)), 0.0f);
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != numel_of(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::int64_t> shape, float v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, float stddev = 1.0f) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = float(rng.normal()) * stddev;
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t ndim() const { return shape_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // NCHW accessor
    float& at4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    float at4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    Tensor reshaped(std::vector<std::int64_t> shape) const {
        if (numel_of(shape) != numel()) throw std::invalid_argument("Tensor::reshaped: numel mismatch");
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(float s) {
        for (auto& x : data_) x *= s;
        return *this;
    }
    Tensor& add_scaled(const Tensor& o, float s) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, float s) { return a *= s; }

    double sum() const {
        double acc = 0.0;
        for (float x : data_) acc += x;
        return acc;
    }
    double mean() const { return data_.empty() ? 0.0 : sum() / double(data_.size()); }

    float max_abs() const {
        float m = 0.0f;
        for (float x : data_) m = std::max(m, std::fabs(x));
        return m;
    }

    bool all_finite() const {
        for (float x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void clamp_(float lo, float hi) {
        for (auto& x : data_) x = std::min(hi, std::max(lo, x));
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

private:
    void check_same_shape(const Tensor& o) const {
        if (shape_ != o.shape_) throw std::invalid_argument("Tensor: shape mismatch");
    }

    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

inline std::string shape_str(const std::vector<std::int64_t>& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        r += std::to_string(s[i]);
        if (i + 1 < s.size()) r += ",";
    }
    return r + "]";
}

} // namespace i2vwm
