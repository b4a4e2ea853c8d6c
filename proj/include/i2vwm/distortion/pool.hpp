#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2vwm/core/rng.hpp"
#include "i2vwm/distortion/spec.hpp"

namespace i2vwm {

// One distortion family in the training pool: a kind plus the parameter
// sub-ranges it samples from (uniform draws; fixed params pass through).
struct NoiseFamily {
    DistortionKind kind = DistortionKind::Identity;
    std::map<std::string, std::pair<double, double>> param_ranges;
    std::map<std::string, double> fixed_params;

    std::string label() const { return to_string(kind); }

    nlohmann::json to_json() const {
        nlohmann::json ranges = nlohmann::json::object();
        for (const auto& [k, v] : param_ranges) ranges[k] = {v.first, v.second};
        return nlohmann::json{
            {"kind", to_string(kind)}, {"param_ranges", ranges}, {"fixed_params", fixed_params}};
    }

    static NoiseFamily from_json(const nlohmann::json& j) {
        NoiseFamily f;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "kind") f.kind = distortion_kind_from_string(it.value().get<std::string>());
            else if (it.key() == "param_ranges") {
                for (auto rit = it.value().begin(); rit != it.value().end(); ++rit) {
                    const auto arr = rit.value().get<std::vector<double>>();
                    if (arr.size() != 2)
                        throw std::invalid_argument("NoiseFamily: range must be [lo, hi]");
                    f.param_ranges[rit.key()] = {arr[0], arr[1]};
                }
            } else if (it.key() == "fixed_params")
                f.fixed_params = it.value().get<std::map<std::string, double>>();
            else
                throw std::invalid_argument("NoiseFamily: unknown key '" + it.key() + "'");
        }
        return f;
    }
};

// Distortion families with adaptive sampling weights. Immutable:
// reweighting returns a new pool.
struct NoisePool {
    std::vector<NoiseFamily> families;
    std::vector<double> weights;
    std::vector<double> last_errors;
    double floor = 0.01;

    static NoisePool uniform(std::vector<NoiseFamily> fams) {
        NoisePool p;
        p.families = std::move(fams);
        if (p.families.empty()) throw std::invalid_argument("NoisePool: no families");
        p.weights.assign(p.families.size(), 1.0 / double(p.families.size()));
        p.last_errors.assign(p.families.size(), 0.0);
        return p;
    }

    void validate() const {
        if (families.empty() || families.size() != weights.size())
            throw std::invalid_argument("NoisePool: families/weights mismatch");
        double sum = 0.0;
        for (double w : weights) {
            if (w <= 0.0) throw std::invalid_argument("NoisePool: weights must be positive");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("NoisePool: weights must sum to 1");
    }

    nlohmann::json to_json() const {
        nlohmann::json fams = nlohmann::json::array();
        for (const auto& f : families) fams.push_back(f.to_json());
        return nlohmann::json{
            {"families", fams}, {"weights", weights}, {"last_errors", last_errors}, {"floor", floor}};
    }
};

// w_i = max(e_i, floor) / sum_j max(e_j, floor). Previous weights are
// discarded; every family keeps a strictly positive share.
inline NoisePool reweight_pool(const NoisePool& pool, const std::vector<double>& errors) {
    pool.validate();
    if (errors.size() != pool.families.size())
        throw std::invalid_argument("reweight_pool: error vector length mismatch");
    for (double e : errors)
        if (!(e >= 0.0 && e <= 1.0))
            throw std::invalid_argument("reweight_pool: error rates must lie in [0,1]");
    NoisePool out = pool;
    double sum = 0.0;
    for (double e : errors) sum += std::max(e, pool.floor);
    for (std::size_t i = 0; i < errors.size(); ++i)
        out.weights[i] = std::max(errors[i], pool.floor) / sum;
    out.last_errors = errors;
    return out;
}

// Draw a family with probability w_i, then draw its parameters uniformly
// from the family's ranges. Deterministic per seed.
inline DistortionSpec sample_distortion(const NoisePool& pool, std::uint64_t seed) {
    pool.validate();
    Rng rng(derive_seed(seed, 0x706f6f6cULL));
    const double u = rng.uniform();
    std::size_t idx = pool.families.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < pool.weights.size(); ++i) {
        acc += pool.weights[i];
        if (u < acc) {
            idx = i;
            break;
        }
    }
    const NoiseFamily& fam = pool.families[idx];
    DistortionSpec spec;
    spec.kind = fam.kind;
    for (const auto& [k, v] : fam.fixed_params) spec.params[k] = v;
    for (const auto& [k, range] : fam.param_ranges) {
        if (fam.kind == DistortionKind::Jpeg && k == "quality")
            spec.params[k] = double(rng.uniform_int(std::int64_t(range.first),
                                                    std::int64_t(range.second)));
        else
            spec.params[k] = rng.uniform(range.first, range.second);
    }
    spec.seed = derive_seed(seed, 0x73706563ULL);
    spec.validate();
    return spec;
}

// The classical training families plus the video-simulation ones (random
// warp and, when a backend is configured, the autoencoder roundtrip).
inline std::vector<NoiseFamily> default_training_families(bool include_autoencoder) {
    std::vector<NoiseFamily> fams;
    auto add = [&](DistortionKind k, std::map<std::string, std::pair<double, double>> ranges,
                   std::map<std::string, double> fixed = {}) {
        NoiseFamily f;
        f.kind = k;
        f.param_ranges = std::move(ranges);
        f.fixed_params = std::move(fixed);
        fams.push_back(std::move(f));
    };
    add(DistortionKind::Identity, {});
    add(DistortionKind::RealCrop, {{"ratio", {0.5, 0.7}}});
    add(DistortionKind::Brightness, {{"factor", {0.5, 2.0}}});
    add(DistortionKind::Contrast, {{"factor", {0.5, 2.0}}});
    add(DistortionKind::Saturation, {{"factor", {0.5, 2.0}}});
    add(DistortionKind::Jpeg, {{"quality", {50.0, 80.0}}});
    add(DistortionKind::GaussianNoise, {{"sigma", {0.0, 0.25}}});
    add(DistortionKind::GaussianBlur, {{"sigma", {0.0, 2.0}}});
    add(DistortionKind::Resize, {{"factor", {0.3, 1.3}}});
    add(DistortionKind::RandomWarp, {},
        {{"sigma", 1.5}, {"scale", 0.015}, {"grid_size", 8.0}});
    if (include_autoencoder) add(DistortionKind::AutoencoderRoundtrip, {});
    return fams;
}

} // namespace i2vwm
