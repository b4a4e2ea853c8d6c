#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace i2vwm {

// Network/geometry configuration. The default sizes target full training at
// 256x256; tests and the desk-scale recipes shrink them through config.
struct ModelConfig {
    int native_resolution = 256;
    int message_length = 32;
    double binarization_threshold = 0.5;

    // message mapper: 16x16x3 seed map, learned 2x upsampling stages to native
    int mapper_channels = 16;

    // fusion encoder: stem width, residual trunk at 2x stem width
    int encoder_base_channels = 32;
    int encoder_blocks = 4;

    // decoder backbone (patchify stem /4, stages with 2x downsample between)
    std::vector<int> decoder_widths = {48, 96, 192, 384};
    std::vector<int> decoder_depths = {2, 2, 6, 2};
    int decoder_mlp_hidden = 512;

    int discriminator_base_channels = 32;

    void validate() const {
        if (native_resolution < 16 || native_resolution % 16 != 0)
            throw std::invalid_argument("ModelConfig: native_resolution must be a positive multiple of 16");
        if (message_length < 1) throw std::invalid_argument("ModelConfig: message_length must be positive");
        if (!(binarization_threshold > 0.0 && binarization_threshold < 1.0))
            throw std::invalid_argument("ModelConfig: binarization_threshold must lie in (0,1)");
        if (decoder_widths.empty() || decoder_widths.size() != decoder_depths.size())
            throw std::invalid_argument("ModelConfig: decoder widths/depths mismatch");
        if (mapper_channels < 1 || encoder_base_channels < 2 || encoder_blocks < 1 ||
            decoder_mlp_hidden < 1 || discriminator_base_channels < 2)
            throw std::invalid_argument("ModelConfig: channel/block counts must be positive");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"native_resolution", native_resolution},
                              {"message_length", message_length},
                              {"binarization_threshold", binarization_threshold},
                              {"architecture",
                               {{"mapper_channels", mapper_channels},
                                {"encoder_base_channels", encoder_base_channels},
                                {"encoder_blocks", encoder_blocks},
                                {"decoder_widths", decoder_widths},
                                {"decoder_depths", decoder_depths},
                                {"decoder_mlp_hidden", decoder_mlp_hidden},
                                {"discriminator_base_channels", discriminator_base_channels}}}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "native_resolution") c.native_resolution = it.value().get<int>();
            else if (it.key() == "message_length") c.message_length = it.value().get<int>();
            else if (it.key() == "binarization_threshold")
                c.binarization_threshold = it.value().get<double>();
            else if (it.key() == "architecture") {
                const auto& a = it.value();
                for (auto ait = a.begin(); ait != a.end(); ++ait) {
                    if (ait.key() == "mapper_channels") c.mapper_channels = ait.value().get<int>();
                    else if (ait.key() == "encoder_base_channels")
                        c.encoder_base_channels = ait.value().get<int>();
                    else if (ait.key() == "encoder_blocks") c.encoder_blocks = ait.value().get<int>();
                    else if (ait.key() == "decoder_widths")
                        c.decoder_widths = ait.value().get<std::vector<int>>();
                    else if (ait.key() == "decoder_depths")
                        c.decoder_depths = ait.value().get<std::vector<int>>();
                    else if (ait.key() == "decoder_mlp_hidden")
                        c.decoder_mlp_hidden = ait.value().get<int>();
                    else if (ait.key() == "discriminator_base_channels")
                        c.discriminator_base_channels = ait.value().get<int>();
                    else
                        throw std::invalid_argument("ModelConfig: unknown architecture key '" +
                                                    ait.key() + "'");
                }
            } else {
                throw std::invalid_argument("ModelConfig: unknown key '" + it.key() + "'");
            }
        }
        c.validate();
        return c;
    }
};

} // namespace i2vwm
