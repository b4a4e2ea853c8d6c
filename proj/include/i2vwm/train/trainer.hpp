#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2vwm/distortion/classical.hpp"
#include "i2vwm/distortion/noise_layer.hpp"
#include "i2vwm/distortion/pool.hpp"
#include "i2vwm/metrics/accuracy.hpp"
#include "i2vwm/model/checkpoint.hpp"
#include "i2vwm/model/jnd.hpp"
#include "i2vwm/nn/adamw.hpp"
#include "i2vwm/train/losses.hpp"

namespace i2vwm {

struct TrainConfig {
    ModelConfig model;
    int epochs = 150;
    int stage1_epochs = 30;
    int batch_size = 16;
    double lr = 1e-4;
    int reweight_interval = 5;
    int save_interval = 10;
    std::uint64_t seed = 1;
    LossWeights weights;
    double jnd_lambda = 1.5;
    std::string perceptual = "off";        // off | pyramid | lpips
    std::string autoencoder = "identity";  // noise-layer roundtrip backend
    std::string autoencoder_path;
    std::vector<NoiseFamily> pool_families = default_training_families(false);
    std::string output_dir = "train_out";
    int validation_images_per_family = 64;

    void validate() const {
        model.validate();
        weights.validate();
        if (epochs < 1 || stage1_epochs < 0 || stage1_epochs > epochs)
            throw std::invalid_argument("TrainConfig: bad epoch split");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
        if (reweight_interval < 1 || save_interval < 1)
            throw std::invalid_argument("TrainConfig: intervals must be positive");
        if (jnd_lambda < 0.0) throw std::invalid_argument("TrainConfig: jnd_lambda must be nonnegative");
        if (pool_families.empty()) throw std::invalid_argument("TrainConfig: empty noise pool");
    }
};

struct EpochRecord {
    int epoch = 0;
    int stage = 1;
    LossBreakdown losses;
    double disc_loss = 0.0;
    std::vector<double> pool_weights;
    std::vector<double> val_errors; // empty when no reweighting happened
};

struct TrainState {
    int epoch = 0;
    int stage = 1;
    NoisePool pool;
};

struct TrainResult {
    std::string final_checkpoint;
    std::string manifest_path;
    std::vector<EpochRecord> epochs;
    std::int64_t noise_layer_invocations = 0; // stage-gating instrumentation
    NoisePool final_pool;
};

// Mean bit-error rate of extract(distort_i(embed(img, msg))) per noise
// family, on held-out images. Deterministic per seed. The embed/extract
// hooks make the pass testable with stub codecs.
inline std::vector<double> validation_pass(
    const std::function<Image(const Image&, const WatermarkMessage&)>& embed_fn,
    const std::function<WatermarkMessage(const Image&)>& extract_fn,
    const std::vector<Image>& val_images, const NoisePool& pool, int message_length,
    std::uint64_t seed, const AutoencoderBackend* autoencoder = nullptr, int max_images = 0) {
    pool.validate();
    if (val_images.empty()) throw std::invalid_argument("validation_pass: empty validation set");
    const std::size_t count = max_images > 0
                                  ? std::min(val_images.size(), std::size_t(max_images))
                                  : val_images.size();

    std::vector<double> errors(pool.families.size(), 0.0);
    for (std::size_t fam = 0; fam < pool.families.size(); ++fam) {
        // family-only pool so the sampled spec always belongs to this family
        NoisePool single = NoisePool::uniform({pool.families[fam]});
        double err = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            Rng mrng(derive_seed(seed, fam, i));
            const auto msg = WatermarkMessage::random(message_length, mrng);
            const Image embedded = embed_fn(val_images[i], msg);
            DistortionSpec spec = sample_distortion(single, derive_seed(seed, fam * 7919 + 13, i));
            const Image distorted = apply_distortion(embedded, spec, spec.seed, autoencoder);
            err += 1.0 - bit_accuracy(extract_fn(distorted), msg);
        }
        errors[fam] = err / double(count);
    }
    return errors;
}

namespace train_detail {

// batched JND thresholds, one plane per image (computed once per dataset)
inline std::vector<Image> jnd_cache(const std::vector<Image>& images) {
    std::vector<Image> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(jnd_map(img));
    return out;
}

struct FusionResult {
    Tensor encoded; // I_E
    Tensor path;    // gradient of I_E w.r.t. residual, divided by lambda
};

// Saturated envelope pixels keep a small leak-through subgradient during
// training (forward stays the exact clamp); a true zero there starves the
// encoder of gradient as soon as its output exceeds the envelope.
inline constexpr float kClampLeak = 0.1f;

// I_E = clip(I_o + lambda * clamp(clip(I_o + res) - I_o, +-T)); the stored
// path folds the three subgradients together.
inline FusionResult fuse_batch(const Tensor& originals, const Tensor& residual,
                               const std::vector<const Image*>& thresholds, double lambda) {
    const std::int64_t n = originals.dim(0), c = originals.dim(1), h = originals.dim(2),
                       w = originals.dim(3);
    FusionResult out;
    out.encoded = Tensor(originals.shape());
    out.path = Tensor(originals.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        const Image& tmap = *thresholds[std::size_t(i)];
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x) {
                    const std::int64_t idx = ((i * c + ch) * h + y) * w + x;
                    const float io = originals[idx];
                    const float pre1 = io + residual[idx];
                    const float wi = std::min(1.0f, std::max(0.0f, pre1));
                    const bool m1 = pre1 > 0.0f && pre1 < 1.0f;
                    const float r = wi - io;
                    const float t = tmap.at(int(y), int(x), 0);
                    const bool m2 = std::fabs(r) < t;
                    const float cl = jnd_clamp(r, t);
                    const float pre2 = io + float(lambda) * cl;
                    const bool m3 = pre2 > 0.0f && pre2 < 1.0f;
                    out.encoded[idx] = std::min(1.0f, std::max(0.0f, pre2));
                    float g = m1 ? 1.0f : kClampLeak;
                    if (!m2) g *= kClampLeak;
                    if (!m3) g *= kClampLeak;
                    out.path[idx] = g;
                }
    }
    return out;
}

inline void append_jsonl(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::runtime_error("manifest: cannot append to " + path);
    f << j.dump() << "\n";
}

} // namespace train_detail

// Two-stage adversarial training. Stage 1 runs with the noise layer
// disabled; stage 2 samples one distortion family per batch from the pool
// and reweights the pool from validation errors at fixed intervals.
inline TrainResult run_training(const TrainConfig& config, const std::vector<Image>& train_images,
                                const std::vector<Image>& val_images) {
    config.validate();
    if (train_images.empty() || val_images.empty())
        throw std::invalid_argument("run_training: datasets must be nonempty");
    const int r = config.model.native_resolution;
    for (const auto& img : train_images)
        if (img.h != r || img.w != r)
            throw std::invalid_argument("run_training: train image resolution " +
                                        std::to_string(img.h) + "x" + std::to_string(img.w) +
                                        " does not match native resolution " + std::to_string(r));
    for (const auto& img : val_images)
        if (img.h != r || img.w != r)
            throw std::invalid_argument("run_training: val image resolution mismatch");
    if (int(train_images.size()) < config.batch_size)
        throw std::invalid_argument("run_training: fewer train images than one batch");

    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    const std::string manifest_path = (fs::path(config.output_dir) / "manifest.jsonl").string();
    std::ofstream(manifest_path, std::ios::trunc); // fresh run

    WatermarkModel model(config.model, config.seed);
    nn::AdamWOptions opt;
    opt.lr = float(config.lr);
    nn::AdamW gen_opt(model.generator_params(), opt);
    nn::AdamW disc_opt(model.discriminator_params(), opt);

    const auto perceptual = make_perceptual(config.perceptual);
    std::unique_ptr<AutoencoderBackend> ae;
    bool pool_has_ae = false;
    for (const auto& f : config.pool_families)
        if (f.kind == DistortionKind::AutoencoderRoundtrip) pool_has_ae = true;
    if (pool_has_ae) ae = make_autoencoder(config.autoencoder, config.autoencoder_path);

    const auto thresholds = train_detail::jnd_cache(train_images);
    const int message_length = config.model.message_length;
    const std::int64_t batch = config.batch_size;
    const std::int64_t nbatches = std::int64_t(train_images.size()) / batch;

    TrainResult result;
    result.manifest_path = manifest_path;
    NoisePool pool = NoisePool::uniform(config.pool_families);

    auto embed_fn = [&](const Image& img, const WatermarkMessage& msg) {
        return fuse_jnd(img, model.encode_watermark(img, model.map_message(msg)), config.jnd_lambda);
    };
    auto extract_fn = [&](const Image& img) {
        const Image native = resize_bilinear(img, r, r);
        return model.binarize(model.decode_soft(native));
    };

    auto save_ckpt = [&](const std::string& name, int epoch, int stage) {
        nlohmann::json st{{"epoch", epoch},
                          {"stage", stage},
                          {"pool", pool.to_json()},
                          {"jnd_lambda", config.jnd_lambda},
                          {"seed", config.seed}};
        const std::string path = (fs::path(config.output_dir) / name).string();
        save_checkpoint_file(checkpoint_from_model(model, st), path);
        return path;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const int stage = epoch < config.stage1_epochs ? 1 : 2;

        std::vector<std::size_t> order(train_images.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(config.seed, 0x657073ULL, std::uint64_t(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[std::size_t(shuffle_rng.uniform_int(0, std::int64_t(i) - 1))]);

        LossBreakdown epoch_losses;
        double epoch_disc = 0.0;

        for (std::int64_t b = 0; b < nbatches; ++b) {
            const std::uint64_t bseed = derive_seed(config.seed, std::uint64_t(epoch) * 1000003ULL,
                                                    std::uint64_t(b));

            std::vector<Image> chunk;
            std::vector<const Image*> tmaps;
            for (std::int64_t i = 0; i < batch; ++i) {
                const std::size_t idx = order[std::size_t(b * batch + i)];
                chunk.push_back(train_images[idx]);
                tmaps.push_back(&thresholds[idx]);
            }
            const Tensor originals = images_to_tensor(chunk);

            Rng msg_rng(derive_seed(bseed, 0x6d7367ULL));
            Tensor messages({batch, message_length});
            for (std::int64_t i = 0; i < messages.numel(); ++i)
                messages[i] = float(msg_rng.next_u64() & 1u);

            // ---- encoder forward ----
            nn::Trace tr_map, tr_fuse;
            const Tensor latent = model.mapper().forward(messages, &tr_map);
            const Tensor fusion_in = nn::concat_channels(originals, latent);
            const Tensor residual = model.fusion().forward(fusion_in, &tr_fuse);
            auto fusion = train_detail::fuse_batch(originals, residual, tmaps, config.jnd_lambda);
            const Tensor& encoded = fusion.encoded;

            // ---- discriminator step (labels: original 0, encoded 1) ----
            double disc_loss = 0.0;
            {
                nn::Trace tr_real, tr_fake;
                const Tensor s_real = model.discriminator().forward(originals, &tr_real);
                const Tensor s_fake = model.discriminator().forward(encoded, &tr_fake);
                Tensor g_real(s_real.shape()), g_fake(s_fake.shape());
                for (std::int64_t i = 0; i < batch; ++i) {
                    const double so = std::clamp(double(s_real[i]), 1e-6, 1.0 - 1e-6);
                    const double se = std::clamp(double(s_fake[i]), 1e-6, 1.0 - 1e-6);
                    disc_loss += -std::log(1.0 - so) - std::log(se);
                    g_real[i] = float(1.0 / (1.0 - so) / double(batch));
                    g_fake[i] = float(-1.0 / se / double(batch));
                }
                disc_loss /= double(batch);
                disc_opt.zero_grad();
                model.discriminator().backward(g_real, tr_real);
                model.discriminator().backward(g_fake, tr_fake);
                disc_opt.step();
            }

            // ---- noise layer (stage 2 only) ----
            DistortionSpec spec; // identity by default
            NoiseOut noised;
            if (stage == 2) {
                spec = sample_distortion(pool, derive_seed(bseed, 0x6e6fULL));
                noised = apply_noise_layer(encoded, spec, derive_seed(bseed, 0x6e31ULL), ae.get());
                ++result.noise_layer_invocations;
            } else {
                noised.value = encoded;
                noised.backward = [](const Tensor& g) { return g; };
            }

            // ---- decoder + losses ----
            nn::Trace tr_dec, tr_disc_gen;
            const Tensor soft = model.decoder().forward(noised.value, &tr_dec);
            const Tensor s_gen = model.discriminator().forward(encoded, &tr_disc_gen);

            const LossBreakdown lb =
                compute_losses(originals, encoded, messages, soft, s_gen, config.weights,
                               perceptual.get());
            if (!std::isfinite(lb.total)) {
                save_ckpt("ckpt_diagnostic.i2vwm", epoch, stage);
                train_detail::append_jsonl(manifest_path,
                                           {{"epoch", epoch},
                                            {"stage", stage},
                                            {"error", "non-finite loss"},
                                            {"batch", b}});
                throw std::runtime_error("run_training: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", diagnostic checkpoint written");
            }

            // ---- generator backward ----
            gen_opt.zero_grad();

            // decode term through the noise layer
            Tensor g_soft(soft.shape());
            for (std::int64_t i = 0; i < soft.numel(); ++i)
                g_soft[i] = float(config.weights.lambda4 * 2.0 *
                                  (double(soft[i]) - double(messages[i])) / double(soft.numel()));
            Tensor g_encoded = noised.backward(model.decoder().backward(g_soft, tr_dec));

            // encoder MSE term
            for (std::int64_t i = 0; i < g_encoded.numel(); ++i)
                g_encoded[i] += float(config.weights.lambda1 * 2.0 *
                                      (double(encoded[i]) - double(originals[i])) /
                                      double(encoded.numel()));

            // perceptual term
            if (perceptual->enabled() && config.weights.lambda2 > 0.0) {
                Tensor g_lpips;
                perceptual->distance_batch(encoded, originals, &g_lpips);
                g_encoded.add_scaled(g_lpips, float(config.weights.lambda2));
            }

            // adversarial term: generator pushes D(I_E) toward the
            // original label (discriminator parameters frozen here)
            if (config.weights.lambda3 > 0.0) {
                Tensor g_s(s_gen.shape());
                for (std::int64_t i = 0; i < batch; ++i) {
                    const double se = std::clamp(double(s_gen[i]), 1e-6, 1.0 - 1e-6);
                    g_s[i] = float(config.weights.lambda3 / (1.0 - se) / double(batch));
                }
                g_encoded += model.discriminator().backward(g_s, tr_disc_gen, /*param_grads=*/false);
            }

            // through the JND fusion into the encoder nets
            Tensor g_residual(residual.shape());
            for (std::int64_t i = 0; i < g_residual.numel(); ++i)
                g_residual[i] = float(config.jnd_lambda) * fusion.path[i] * g_encoded[i];
            const Tensor g_fusion_in = model.fusion().backward(g_residual, tr_fuse);
            const auto [g_img, g_latent] = nn::split_channels(g_fusion_in, 3);
            (void)g_img;
            model.mapper().backward(g_latent, tr_map);
            gen_opt.step();

            epoch_losses.l_enc += lb.l_enc;
            epoch_losses.l_lpips += lb.l_lpips;
            epoch_losses.l_adv += lb.l_adv;
            epoch_losses.l_dec += lb.l_dec;
            epoch_losses.total += lb.total;
            epoch_disc += disc_loss;
        }

        epoch_losses.l_enc /= double(nbatches);
        epoch_losses.l_lpips /= double(nbatches);
        epoch_losses.l_adv /= double(nbatches);
        epoch_losses.l_dec /= double(nbatches);
        epoch_losses.total /= double(nbatches);
        epoch_disc /= double(nbatches);

        // ---- periodic pool reweighting from validation ----
        std::vector<double> val_errors;
        if (stage == 2 && (epoch - config.stage1_epochs + 1) % config.reweight_interval == 0) {
            val_errors = validation_pass(embed_fn, extract_fn, val_images, pool, message_length,
                                         derive_seed(config.seed, 0x76616cULL, std::uint64_t(epoch)),
                                         ae.get(), config.validation_images_per_family);
            pool = reweight_pool(pool, val_errors);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;
        rec.losses = epoch_losses;
        rec.disc_loss = epoch_disc;
        rec.pool_weights = pool.weights;
        rec.val_errors = val_errors;
        result.epochs.push_back(rec);

        nlohmann::json jrec{{"epoch", epoch},
                            {"stage", stage},
                            {"losses",
                             {{"enc", epoch_losses.l_enc},
                              {"lpips", epoch_losses.l_lpips},
                              {"adv", epoch_losses.l_adv},
                              {"dec", epoch_losses.l_dec},
                              {"total", epoch_losses.total},
                              {"disc", epoch_disc}}},
                            {"pool_weights", pool.weights}};
        jrec["val_errors"] = val_errors.empty() ? nlohmann::json(nullptr) : nlohmann::json(val_errors);
        train_detail::append_jsonl(manifest_path, jrec);

        if ((epoch + 1) % config.save_interval == 0)
            save_ckpt("ckpt_e" + std::to_string(epoch) + ".i2vwm", epoch, stage);
    }

    result.final_checkpoint = save_ckpt("ckpt_final.i2vwm", config.epochs - 1,
                                        config.epochs <= config.stage1_epochs ? 1 : 2);
    result.final_pool = pool;
    return result;
}

} // namespace i2vwm
