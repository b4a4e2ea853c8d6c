#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "i2vwm/core/image.hpp"
#include "i2vwm/model/config.hpp"
#include "i2vwm/model/message.hpp"
#include "i2vwm/nn/adamw.hpp"
#include "i2vwm/nn/layers.hpp"

namespace i2vwm {

// Spatial watermark latent at the model-native resolution (3 x R x R).
struct WatermarkLatent {
    Tensor values;
};

namespace nets {

using namespace nn;

// ResNet block with a projected shortcut, used at stage transitions.
class ProjResidualBlock : public Layer {
public:
    ProjResidualBlock(const std::string& name, int in_c, int out_c, int stride) {
        main_.emplace<Conv2d>(name + ".conv1", in_c, out_c, 3, stride);
        main_.emplace<GroupNorm>(name + ".gn1", out_c);
        main_.emplace<ReLU>();
        main_.emplace<Conv2d>(name + ".conv2", out_c, out_c, 3);
        main_.emplace<GroupNorm>(name + ".gn2", out_c);
        shortcut_.emplace<Conv2d>(name + ".proj", in_c, out_c, 1, stride, 0);
        shortcut_.emplace<GroupNorm>(name + ".gnp", out_c);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override {
        Tensor t = main_.forward(x, tr ? tr->child(0) : nullptr);
        Tensor s = shortcut_.forward(x, tr ? tr->child(1) : nullptr);
        t += s;
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
        Tensor gx = main_.backward(dz, tr.child_at(0), param_grads);
        gx += shortcut_.backward(dz, tr.child_at(1), param_grads);
        return gx;
    }

    void collect_params(std::vector<Param*>& out) override {
        main_.collect_params(out);
        shortcut_.collect_params(out);
    }
    void init(Rng& rng) override {
        main_.init(rng);
        shortcut_.init(rng);
    }

private:
    Sequential main_;
    Sequential shortcut_;
};

// E_M: message -> linear 16x16x3 seed map -> learned 2x upsampling stages
// to a native-resolution 3-channel latent.
class MessageMapper {
public:
    explicit MessageMapper(const ModelConfig& cfg)
        : length_(cfg.message_length), resolution_(cfg.native_resolution),
          proj_("mapper.proj", cfg.message_length, kSeed * kSeed * 3) {
        int size = kSeed;
        int in_c = 3;
        int idx = 0;
        while (size < resolution_) {
            const int out_c = cfg.mapper_channels;
            stages_.emplace<UpsampleNearest2x>();
            stages_.emplace<Conv2d>("mapper.up" + std::to_string(idx), in_c, out_c, 3);
            stages_.emplace<GroupNorm>("mapper.gn" + std::to_string(idx), out_c);
            stages_.emplace<ReLU>();
            in_c = out_c;
            size *= 2;
            ++idx;
        }
        out_ = std::make_unique<Conv2d>("mapper.out", in_c, 3, 3);
        if (size != resolution_)
            throw std::invalid_argument("MessageMapper: native resolution must be 16 * 2^k");
    }

    // msgs: (N, L) with entries in {0,1}; output latent (N, 3, R, R)
    Tensor forward(const Tensor& msgs, nn::Trace* tr) const {
        if (msgs.ndim() != 2 || msgs.dim(1) != length_)
            throw std::invalid_argument("MessageMapper: message length mismatch");
        Tensor sym(msgs.shape());
        for (std::int64_t i = 0; i < msgs.numel(); ++i) sym[i] = msgs[i] * 2.0f - 1.0f;
        Tensor x = proj_.forward(sym, tr ? tr->child(0) : nullptr);
        x = x.reshaped({msgs.dim(0), 3, kSeed, kSeed});
        x = stages_.forward(x, tr ? tr->child(1) : nullptr);
        return out_->forward(x, tr ? tr->child(2) : nullptr);
    }

    void backward(const Tensor& gy, const nn::Trace& tr) {
        Tensor g = out_->backward(gy, tr.child_at(2));
        g = stages_.backward(g, tr.child_at(1));
        g = g.reshaped({g.dim(0), std::int64_t(kSeed) * kSeed * 3});
        proj_.backward(g, tr.child_at(0));
    }

    void collect_params(std::vector<nn::Param*>& out) {
        proj_.collect_params(out);
        stages_.collect_params(out);
        out_->collect_params(out);
    }
    void init(Rng& rng) {
        proj_.init(rng);
        stages_.init(rng);
        out_->init(rng);
    }

    int message_length() const { return length_; }

private:
    static constexpr int kSeed = 16;
    int length_;
    int resolution_;
    Linear proj_;
    Sequential stages_;
    std::unique_ptr<Conv2d> out_;
};

// E_FF: stem /2, trunk of residual blocks at /4, upsampling head back to a
// 3-channel residual at native resolution. Input is the 6-channel
// concatenation of image and latent; output is the watermark residual.
class FusionEncoder : public Layer {
public:
    explicit FusionEncoder(const ModelConfig& cfg) {
        const int w = cfg.encoder_base_channels;
        seq_.emplace<Conv2d>("fusion.stem", 6, w, 3, 2);
        seq_.emplace<GroupNorm>("fusion.gn_stem", w);
        seq_.emplace<ReLU>();
        seq_.emplace<Conv2d>("fusion.down", w, 2 * w, 3, 2);
        seq_.emplace<GroupNorm>("fusion.gn_down", 2 * w);
        seq_.emplace<ReLU>();
        for (int i = 0; i < cfg.encoder_blocks; ++i)
            seq_.emplace<ResidualBlock>("fusion.block" + std::to_string(i), 2 * w);
        seq_.emplace<UpsampleNearest2x>();
        seq_.emplace<Conv2d>("fusion.up1", 2 * w, w, 3);
        seq_.emplace<GroupNorm>("fusion.gn_up1", w);
        seq_.emplace<ReLU>();
        seq_.emplace<UpsampleNearest2x>();
        seq_.emplace<Conv2d>("fusion.up2", w, w / 2, 3);
        seq_.emplace<GroupNorm>("fusion.gn_up2", w / 2);
        seq_.emplace<ReLU>();
        // small init keeps the initial residual well inside the JND envelope
        seq_.emplace<Conv2d>("fusion.out", w / 2, 3, 3, 1, -1, false, 0.02f);
    }

    Tensor forward(const Tensor& x, Trace* tr) const override { return seq_.forward(x, tr); }
    Tensor backward(const Tensor& gy, const Trace& tr, bool pg = true) override {
        return seq_.backward(gy, tr, pg);
    }
    void collect_params(std::vector<Param*>& out) override { seq_.collect_params(out); }
    void init(Rng& rng) override { seq_.init(rng); }

private:
    Sequential seq_;
};

// Decoder: patchify stem, stages of ConvNeXt-style blocks with 2x
// downsampling between, global pooling and a two-layer MLP head with
// sigmoid output of length L.
class DecoderNet {
public:
    explicit DecoderNet(const ModelConfig& cfg)
        : length_(cfg.message_length), resolution_(cfg.native_resolution) {
        const auto& widths = cfg.decoder_widths;
        const auto& depths = cfg.decoder_depths;
        int size = cfg.native_resolution / 4;
        body_.emplace<Conv2d>("decoder.stem", 3, widths[0], 4, 4, 0);
        body_.emplace<ChannelLayerNorm>("decoder.stem_norm", widths[0]);
        for (std::size_t s = 0; s < widths.size(); ++s) {
            if (s > 0) {
                body_.emplace<ChannelLayerNorm>("decoder.down" + std::to_string(s) + "_norm",
                                                widths[s - 1]);
                body_.emplace<Conv2d>("decoder.down" + std::to_string(s), widths[s - 1], widths[s],
                                      2, 2, 0);
                size /= 2;
            }
            for (int b = 0; b < depths[s]; ++b)
                body_.emplace<ConvNeXtBlock>(
                    "decoder.stage" + std::to_string(s) + "_block" + std::to_string(b), widths[s]);
        }
        if (size < 1)
            throw std::invalid_argument("DecoderNet: too many stages for native resolution");
        final_norm_ = std::make_unique<ChannelLayerNorm>("decoder.head_norm", widths.back());
        fc1_ = std::make_unique<Linear>("decoder.head_fc1", widths.back(), cfg.decoder_mlp_hidden);
        fc2_ = std::make_unique<Linear>("decoder.head_fc2", cfg.decoder_mlp_hidden, length_);
    }

    // x: (N,3,R,R) -> soft messages (N,L) in [0,1]
    Tensor forward(const Tensor& x, nn::Trace* tr) const {
        Tensor t = body_.forward(x, tr ? tr->child(0) : nullptr);
        t = pool_.forward(t, tr ? tr->child(1) : nullptr);
        const std::int64_t n = t.dim(0), c = t.dim(1);
        t = t.reshaped({n, c, 1, 1});
        t = final_norm_->forward(t, tr ? tr->child(2) : nullptr);
        t = t.reshaped({n, c});
        t = fc1_->forward(t, tr ? tr->child(3) : nullptr);
        t = gelu_.forward(t, tr ? tr->child(4) : nullptr);
        t = fc2_->forward(t, tr ? tr->child(5) : nullptr);
        return sig_.forward(t, tr ? tr->child(6) : nullptr);
    }

    Tensor backward(const Tensor& gy, const nn::Trace& tr, bool param_grads = true) {
        Tensor g = sig_.backward(gy, tr.child_at(6), param_grads);
        g = fc2_->backward(g, tr.child_at(5), param_grads);
        g = gelu_.backward(g, tr.child_at(4), param_grads);
        g = fc1_->backward(g, tr.child_at(3), param_grads);
        const std::int64_t n = g.dim(0), c = g.dim(1);
        g = g.reshaped({n, c, 1, 1});
        g = final_norm_->backward(g, tr.child_at(2), param_grads);
        g = g.reshaped({n, c});
        g = pool_.backward(g, tr.child_at(1), param_grads);
        return body_.backward(g, tr.child_at(0), param_grads);
    }

    void collect_params(std::vector<nn::Param*>& out) {
        body_.collect_params(out);
        final_norm_->collect_params(out);
        fc1_->collect_params(out);
        fc2_->collect_params(out);
    }
    void init(Rng& rng) {
        body_.init(rng);
        final_norm_->init(rng);
        fc1_->init(rng);
        fc2_->init(rng);
    }

    int message_length() const { return length_; }

private:
    int length_;
    int resolution_;
    Sequential body_;
    GlobalAvgPool pool_;
    std::unique_ptr<ChannelLayerNorm> final_norm_;
    std::unique_ptr<Linear> fc1_;
    Gelu gelu_;
    std::unique_ptr<Linear> fc2_;
    Sigmoid sig_;
};

// 18-layer residual classifier with a single-logit sigmoid head.
// Convention: score 1 = watermarked.
class DiscriminatorNet {
public:
    explicit DiscriminatorNet(const ModelConfig& cfg) {
        const int w = cfg.discriminator_base_channels;
        body_.emplace<Conv2d>("disc.stem", 3, w, 3, 2);
        body_.emplace<GroupNorm>("disc.gn_stem", w);
        body_.emplace<ReLU>();
        int in_c = w;
        for (int s = 0; s < 4; ++s) {
            const int out_c = w << s;
            body_.emplace<ProjResidualBlock>("disc.stage" + std::to_string(s) + "a", in_c, out_c, 2);
            body_.emplace<ResidualBlock>("disc.stage" + std::to_string(s) + "b", out_c);
            in_c = out_c;
        }
        fc_ = std::make_unique<Linear>("disc.fc", in_c, 1);
    }

    // x: (N,3,R,R) -> scores (N,1) in [0,1]
    Tensor forward(const Tensor& x, nn::Trace* tr) const {
        Tensor t = body_.forward(x, tr ? tr->child(0) : nullptr);
        t = pool_.forward(t, tr ? tr->child(1) : nullptr);
        t = fc_->forward(t, tr ? tr->child(2) : nullptr);
        return sig_.forward(t, tr ? tr->child(3) : nullptr);
    }

    Tensor backward(const Tensor& gy, const nn::Trace& tr, bool param_grads = true) {
        Tensor g = sig_.backward(gy, tr.child_at(3), param_grads);
        g = fc_->backward(g, tr.child_at(2), param_grads);
        g = pool_.backward(g, tr.child_at(1), param_grads);
        return body_.backward(g, tr.child_at(0), param_grads);
    }

    void collect_params(std::vector<nn::Param*>& out) {
        body_.collect_params(out);
        fc_->collect_params(out);
    }
    void init(Rng& rng) {
        body_.init(rng);
        fc_->init(rng);
    }

private:
    Sequential body_;
    GlobalAvgPool pool_;
    std::unique_ptr<Linear> fc_;
    Sigmoid sig_;
};

} // namespace nets

// The four networks plus the public single-image operations. Evaluation
// calls are const and thread-safe; training drives the networks directly.
class WatermarkModel {
public:
    explicit WatermarkModel(ModelConfig cfg, std::uint64_t init_seed = 1)
        : cfg_(validated(std::move(cfg))), mapper_(cfg_), fusion_(cfg_), decoder_(cfg_),
          disc_(cfg_) {
        Rng rng(derive_seed(init_seed, 0x6d6f64656cULL));
        mapper_.init(rng);
        fusion_.init(rng);
        decoder_.init(rng);
        disc_.init(rng);
    }

    const ModelConfig& config() const { return cfg_; }

    nets::MessageMapper& mapper() { return mapper_; }
    nets::FusionEncoder& fusion() { return fusion_; }
    nets::DecoderNet& decoder() { return decoder_; }
    nets::DiscriminatorNet& discriminator() { return disc_; }
    const nets::MessageMapper& mapper() const { return mapper_; }
    const nets::FusionEncoder& fusion() const { return fusion_; }
    const nets::DecoderNet& decoder() const { return decoder_; }
    const nets::DiscriminatorNet& disc() const { return disc_; }

    std::vector<nn::Param*> all_params() {
        std::vector<nn::Param*> out;
        mapper_.collect_params(out);
        fusion_.collect_params(out);
        decoder_.collect_params(out);
        disc_.collect_params(out);
        return out;
    }
    std::vector<nn::Param*> generator_params() {
        std::vector<nn::Param*> out;
        mapper_.collect_params(out);
        fusion_.collect_params(out);
        decoder_.collect_params(out);
        return out;
    }
    std::vector<nn::Param*> discriminator_params() {
        std::vector<nn::Param*> out;
        disc_.collect_params(out);
        return out;
    }

    // ---- public operations (evaluation mode) --------------------------

    WatermarkLatent map_message(const WatermarkMessage& msg) const {
        if (int(msg.size()) != cfg_.message_length)
            throw std::invalid_argument("map_message: message length " + std::to_string(msg.size()) +
                                        " does not match configured length " +
                                        std::to_string(cfg_.message_length));
        Tensor m({1, cfg_.message_length});
        for (int i = 0; i < cfg_.message_length; ++i) m[i] = float(msg[i]);
        Tensor latent = mapper_.forward(m, nullptr);
        return WatermarkLatent{latent.reshaped({3, cfg_.native_resolution, cfg_.native_resolution})};
    }

    // W_I: the watermark image produced by fusing the latent with the cover.
    Image encode_watermark(const Image& img, const WatermarkLatent& latent) const {
        require_native(img, "encode_watermark");
        const std::int64_t r = cfg_.native_resolution;
        if (latent.values.shape() != std::vector<std::int64_t>({3, r, r}))
            throw std::invalid_argument("encode_watermark: latent shape mismatch");
        Tensor x = concat_input(image_to_tensor(img), latent.values.reshaped({1, 3, r, r}));
        Tensor res = fusion_.forward(x, nullptr);
        Image out = img;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < img.h; ++y)
                for (int xx = 0; xx < img.w; ++xx)
                    out.at(y, xx, c) = clampf(img.at(y, xx, c) + res.at4(0, c, y, xx), 0.0f, 1.0f);
        return out;
    }

    std::vector<double> decode_soft(const Image& img) const {
        require_native(img, "decode_soft");
        Tensor soft = decoder_.forward(image_to_tensor(img), nullptr);
        std::vector<double> out(std::size_t(cfg_.message_length));
        for (int i = 0; i < cfg_.message_length; ++i) out[std::size_t(i)] = double(soft[i]);
        return out;
    }

    WatermarkMessage binarize(const std::vector<double>& soft) const {
        std::vector<std::uint8_t> bits(soft.size());
        for (std::size_t i = 0; i < soft.size(); ++i)
            bits[i] = soft[i] >= cfg_.binarization_threshold ? 1 : 0;
        return WatermarkMessage(std::move(bits));
    }

    double discriminate(const Image& img) const {
        require_native(img, "discriminate");
        Tensor s = disc_.forward(image_to_tensor(img), nullptr);
        return double(s[0]);
    }

    static Tensor concat_input(const Tensor& img, const Tensor& latent) {
        return nn::concat_channels(img, latent);
    }

private:
    static ModelConfig validated(ModelConfig c) {
        c.validate();
        return c;
    }

    void require_native(const Image& img, const char* what) const {
        check_image(img, what);
        if (img.h != cfg_.native_resolution || img.w != cfg_.native_resolution || img.c != 3)
            throw std::invalid_argument(
                std::string(what) + ": expected native resolution " +
                std::to_string(cfg_.native_resolution) + "x" + std::to_string(cfg_.native_resolution) +
                "x3, got " + std::to_string(img.h) + "x" + std::to_string(img.w) + "x" +
                std::to_string(img.c));
    }

    ModelConfig cfg_;
    nets::MessageMapper mapper_;
    nets::FusionEncoder fusion_;
    nets::DecoderNet decoder_;
    nets::DiscriminatorNet disc_;
};

} // namespace i2vwm
