#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/model/checkpoint.hpp"
#include "i2vwm/nn/adamw.hpp"
#include "i2vwm/nn/layers.hpp"

namespace i2vwm {

// Pluggable image autoencoder used by the roundtrip distortion. Three
// tiers: identity (always available), a small trainable convolutional
// autoencoder, and externally provided pretrained weights.
class AutoencoderBackend {
public:
    virtual ~AutoencoderBackend() = default;
    virtual std::string name() const = 0;

    virtual Image roundtrip(const Image& img) const = 0;

    // Training-path hooks. Non-differentiable backends keep the default
    // straight-through backward.
    virtual Tensor roundtrip_tensor(const Tensor& x, nn::Trace* /*tr*/) const {
        const std::int64_t n = x.dim(0);
        Tensor out(x.shape());
        for (std::int64_t i = 0; i < n; ++i) {
            const Image y = roundtrip(tensor_to_image(x, i));
            for (int c = 0; c < 3; ++c)
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) out.at4(i, c, yy, xx) = y.at(yy, xx, c);
        }
        return out;
    }
    virtual Tensor backward_tensor(const Tensor& gy, const nn::Trace& /*tr*/) const { return gy; }
};

class IdentityAutoencoder : public AutoencoderBackend {
public:
    std::string name() const override { return "identity"; }
    Image roundtrip(const Image& img) const override { return img; }
    Tensor roundtrip_tensor(const Tensor& x, nn::Trace*) const override { return x; }
};

// Small convolutional autoencoder (stride-4 bottleneck), trainable on a
// handful of images; stands in for a full latent autoencoder in CI runs.
class TinyAutoencoder : public AutoencoderBackend {
public:
    explicit TinyAutoencoder(int base_channels = 16, std::uint64_t init_seed = 1)
        : base_(base_channels) {
        net_.emplace<nn::Conv2d>("ae.enc1", 3, base_, 3, 2);
        net_.emplace<nn::GroupNorm>("ae.gn1", base_);
        net_.emplace<nn::Gelu>();
        net_.emplace<nn::Conv2d>("ae.enc2", base_, base_ / 2, 3, 2);
        net_.emplace<nn::UpsampleNearest2x>();
        net_.emplace<nn::Conv2d>("ae.dec1", base_ / 2, base_, 3);
        net_.emplace<nn::GroupNorm>("ae.gn2", base_);
        net_.emplace<nn::Gelu>();
        net_.emplace<nn::UpsampleNearest2x>();
        net_.emplace<nn::Conv2d>("ae.dec2", base_, 3, 3);
        net_.emplace<nn::Sigmoid>();
        Rng rng(derive_seed(init_seed, 0x6165ULL));
        net_.init(rng);
    }

    std::string name() const override { return "tiny"; }

    Image roundtrip(const Image& img) const override {
        check_image(img, "autoencoder_roundtrip");
        if (img.h % 4 != 0 || img.w % 4 != 0) {
            // pad to /4 then crop back so the bottleneck stride divides evenly
            const int ph = (img.h + 3) / 4 * 4, pw = (img.w + 3) / 4 * 4;
            Image padded(ph, pw, img.c);
            for (int y = 0; y < ph; ++y)
                for (int x = 0; x < pw; ++x)
                    for (int c = 0; c < img.c; ++c)
                        padded.at(y, x, c) = img.at(std::min(y, img.h - 1), std::min(x, img.w - 1), c);
            Image out = roundtrip(padded);
            Image crop(img.h, img.w, img.c);
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x)
                    for (int c = 0; c < img.c; ++c) crop.at(y, x, c) = out.at(y, x, c);
            return crop;
        }
        const Tensor y = net_.forward(image_to_tensor(img), nullptr);
        Image out = tensor_to_image(y);
        out.clip01();
        return out;
    }

    Tensor roundtrip_tensor(const Tensor& x, nn::Trace* tr) const override {
        return net_.forward(x, tr);
    }
    Tensor backward_tensor(const Tensor& gy, const nn::Trace& tr) const override {
        return const_cast<nn::Sequential&>(net_).backward(gy, tr, /*param_grads=*/false);
    }

    // Short reconstruction training; returns final mean PSNR proxy (MSE).
    double train(const std::vector<Image>& images, int epochs, int batch, float lr,
                 std::uint64_t seed) {
        if (images.empty()) throw std::invalid_argument("TinyAutoencoder::train: no images");
        std::vector<nn::Param*> ps;
        net_.collect_params(ps);
        nn::AdamWOptions opt;
        opt.lr = lr;
        nn::AdamW adam(ps, opt);
        Rng rng(seed);
        double last = 0.0;
        for (int e = 0; e < epochs; ++e) {
            for (std::size_t off = 0; off < images.size(); off += std::size_t(batch)) {
                std::vector<Image> chunk;
                for (std::size_t i = off; i < std::min(images.size(), off + std::size_t(batch)); ++i)
                    chunk.push_back(images[rng.uniform_int(0, std::int64_t(images.size()) - 1)]);
                const Tensor x = images_to_tensor(chunk);
                nn::Trace tr;
                const Tensor y = net_.forward(x, &tr);
                Tensor g(y.shape());
                double mse = 0.0;
                for (std::int64_t i = 0; i < y.numel(); ++i) {
                    const float d = y[i] - x[i];
                    g[i] = 2.0f * d / float(y.numel());
                    mse += double(d) * d;
                }
                last = mse / double(y.numel());
                adam.zero_grad();
                net_.backward(g, tr);
                adam.step();
            }
        }
        return last;
    }

    void save(const std::string& path) const {
        using namespace ckpt_detail;
        std::string out;
        out.append("I2VWMAE1", 8);
        nlohmann::json j{{"format", "i2vwm-ae-v1"}, {"base_channels", base_}};
        const std::string js = j.dump();
        put_u32(out, std::uint32_t(js.size()));
        out += js;
        std::vector<nn::Param*> ps;
        const_cast<nn::Sequential&>(net_).collect_params(ps);
        put_u32(out, std::uint32_t(ps.size()));
        for (auto* p : ps) {
            put_u32(out, std::uint32_t(p->name.size()));
            out += p->name;
            put_u32(out, std::uint32_t(p->value.ndim()));
            for (auto d : p->value.shape()) put_i64(out, d);
            const std::size_t pos = out.size();
            out.resize(pos + std::size_t(p->value.numel()) * 4);
            std::memcpy(out.data() + pos, p->value.data(), std::size_t(p->value.numel()) * 4);
        }
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("TinyAutoencoder: cannot write " + path);
        f.write(out.data(), std::streamsize(out.size()));
    }

    static std::unique_ptr<TinyAutoencoder> load(const std::string& path) {
        using namespace ckpt_detail;
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("TinyAutoencoder: cannot open " + path);
        std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        if (buf.size() < 12 || std::memcmp(buf.data(), "I2VWMAE1", 8) != 0)
            throw std::runtime_error("TinyAutoencoder: bad magic in " + path);
        std::size_t off = 8;
        const auto jlen = get_u32(buf, off);
        const auto j = nlohmann::json::parse(buf.substr(off, jlen));
        off += jlen;
        auto ae = std::make_unique<TinyAutoencoder>(j.at("base_channels").get<int>());
        std::vector<nn::Param*> ps;
        ae->net_.collect_params(ps);
        const auto nblobs = get_u32(buf, off);
        if (nblobs != ps.size()) throw std::runtime_error("TinyAutoencoder: blob count mismatch");
        for (auto* p : ps) {
            const auto nlen = get_u32(buf, off);
            const std::string name = buf.substr(off, nlen);
            off += nlen;
            if (name != p->name) throw std::runtime_error("TinyAutoencoder: blob order mismatch");
            const auto ndim = get_u32(buf, off);
            std::vector<std::int64_t> shape(ndim);
            for (auto& d : shape) d = get_i64(buf, off);
            if (shape != p->value.shape()) throw std::runtime_error("TinyAutoencoder: shape mismatch");
            std::memcpy(p->value.data(), buf.data() + off, std::size_t(p->value.numel()) * 4);
            off += std::size_t(p->value.numel()) * 4;
        }
        return ae;
    }

private:
    int base_;
    nn::Sequential net_;
};

// Backend factory. `kind` is one of identity | tiny | pretrained; tiny and
// pretrained load weights from `path`.
inline std::unique_ptr<AutoencoderBackend> make_autoencoder(const std::string& kind,
                                                            const std::string& path = "") {
    if (kind == "identity") return std::make_unique<IdentityAutoencoder>();
    if (kind == "tiny") {
        if (path.empty())
            throw std::runtime_error(
                "autoencoder backend 'tiny' needs a weights file; train one with the "
                "TinyAutoencoder API or switch the config to the 'identity' backend");
        return TinyAutoencoder::load(path);
    }
    if (kind == "pretrained")
        throw std::runtime_error(
            "autoencoder backend 'pretrained' is not bundled: download a latent-autoencoder "
            "weight file, convert it to the i2vwm-ae-v1 layout, and pass its path; tests and "
            "CI use the 'identity' or 'tiny' backends");
    throw std::runtime_error("unknown autoencoder backend '" + kind +
                             "' (expected identity|tiny|pretrained)");
}

} // namespace i2vwm
