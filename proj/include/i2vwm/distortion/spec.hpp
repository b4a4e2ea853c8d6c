#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace i2vwm {

enum class DistortionKind {
    Identity,
    RealCrop,
    Crop,
    Dropout,
    Resize,
    Jpeg,
    GaussianBlur,
    GaussianNoise,
    Brightness,
    Contrast,
    Saturation,
    Grayscale,
    RandomWarp,
    AutoencoderRoundtrip,
};

inline const char* to_string(DistortionKind k) {
    switch (k) {
    case DistortionKind::Identity: return "identity";
    case DistortionKind::RealCrop: return "real_crop";
    case DistortionKind::Crop: return "crop";
    case DistortionKind::Dropout: return "dropout";
    case DistortionKind::Resize: return "resize";
    case DistortionKind::Jpeg: return "jpeg";
    case DistortionKind::GaussianBlur: return "gaussian_blur";
    case DistortionKind::GaussianNoise: return "gaussian_noise";
    case DistortionKind::Brightness: return "brightness";
    case DistortionKind::Contrast: return "contrast";
    case DistortionKind::Saturation: return "saturation";
    case DistortionKind::Grayscale: return "grayscale";
    case DistortionKind::RandomWarp: return "random_warp";
    case DistortionKind::AutoencoderRoundtrip: return "autoencoder_roundtrip";
    }
    return "?";
}

inline DistortionKind distortion_kind_from_string(const std::string& s) {
    static const std::map<std::string, DistortionKind> table = {
        {"identity", DistortionKind::Identity},
        {"real_crop", DistortionKind::RealCrop},
        {"crop", DistortionKind::Crop},
        {"dropout", DistortionKind::Dropout},
        {"resize", DistortionKind::Resize},
        {"jpeg", DistortionKind::Jpeg},
        {"gaussian_blur", DistortionKind::GaussianBlur},
        {"gaussian_noise", DistortionKind::GaussianNoise},
        {"brightness", DistortionKind::Brightness},
        {"contrast", DistortionKind::Contrast},
        {"saturation", DistortionKind::Saturation},
        {"grayscale", DistortionKind::Grayscale},
        {"random_warp", DistortionKind::RandomWarp},
        {"autoencoder_roundtrip", DistortionKind::AutoencoderRoundtrip},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown distortion kind '" + s + "'");
    return it->second;
}

struct ParamRange {
    const char* name;
    double lo;
    double hi;
};

// Declared valid parameter ranges per kind. Training samples narrower
// sub-ranges through the noise pool; benchmark settings must stay inside
// these bounds.
inline std::vector<ParamRange> declared_ranges(DistortionKind k) {
    switch (k) {
    case DistortionKind::RealCrop: return {{"ratio", 0.5, 0.7}};
    case DistortionKind::Crop: return {{"ratio", 0.5, 0.7}};
    case DistortionKind::Dropout: return {{"fraction", 0.3, 0.5}};
    case DistortionKind::Resize: return {{"factor", 0.3, 1.3}};
    case DistortionKind::Jpeg: return {{"quality", 50.0, 80.0}};
    case DistortionKind::GaussianBlur: return {{"sigma", 0.0, 2.0}};
    case DistortionKind::GaussianNoise: return {{"sigma", 0.0, 1.0}};
    case DistortionKind::Brightness: return {{"factor", 0.5, 2.0}};
    case DistortionKind::Contrast: return {{"factor", 0.5, 2.0}};
    case DistortionKind::Saturation: return {{"factor", 0.5, 2.0}};
    case DistortionKind::RandomWarp:
        return {{"sigma", 0.0, 8.0}, {"scale", 0.0, 0.1}, {"grid_size", 2.0, 64.0}};
    default: return {};
    }
}

// A single concrete distortion: kind, numeric parameters, realization seed.
struct DistortionSpec {
    DistortionKind kind = DistortionKind::Identity;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;

    double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end())
            throw std::invalid_argument(std::string("DistortionSpec(") + to_string(kind) +
                                        "): missing parameter '" + name + "'");
        return it->second;
    }

    double param_or(const std::string& name, double fallback) const {
        auto it = params.find(name);
        return it == params.end() ? fallback : it->second;
    }

    void validate() const {
        for (const auto& r : declared_ranges(kind)) {
            auto it = params.find(r.name);
            if (it == params.end()) continue; // defaults may apply
            if (!(it->second >= r.lo && it->second <= r.hi))
                throw std::invalid_argument(std::string("DistortionSpec(") + to_string(kind) + "): " +
                                            r.name + "=" + std::to_string(it->second) +
                                            " outside declared range [" + std::to_string(r.lo) +
                                            ", " + std::to_string(r.hi) + "]");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"kind", to_string(kind)}, {"params", params}, {"seed", seed}};
    }

    static DistortionSpec from_json(const nlohmann::json& j) {
        DistortionSpec s;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "kind") s.kind = distortion_kind_from_string(it.value().get<std::string>());
            else if (it.key() == "params")
                s.params = it.value().get<std::map<std::string, double>>();
            else if (it.key() == "seed") s.seed = it.value().get<std::uint64_t>();
            else throw std::invalid_argument("DistortionSpec: unknown key '" + it.key() + "'");
        }
        s.validate();
        return s;
    }
};

} // namespace i2vwm
