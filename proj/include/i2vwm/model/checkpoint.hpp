#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "i2vwm/model/networks.hpp"

namespace i2vwm {

// Checkpoint archive, format id "i2vwm-ckpt-v1".
//
//   magic "I2VWMCK1" | u32 json_len | json | u32 n_blobs |
//   per blob: u32 name_len | name | u32 ndim | i64 dims... | f32 data (LE)
//
// The json block carries {format, config, training_state}. The embedded
// config takes precedence over any externally supplied config at load time.
struct ModelCheckpoint {
    ModelConfig config;
    nlohmann::json training_state = nlohmann::json::object();
    // parameter blobs by name (model parameters plus optional extras such
    // as optimizer moments)
    std::map<std::string, Tensor> blobs;

    static constexpr const char* kFormat = "i2vwm-ckpt-v1";
    static constexpr const char* kMagic = "I2VWMCK1";
};

namespace ckpt_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = char(v & 0xff);
    b[1] = char((v >> 8) & 0xff);
    b[2] = char((v >> 16) & 0xff);
    b[3] = char((v >> 24) & 0xff);
    out.append(b, 4);
}
inline void put_i64(std::string& out, std::int64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const std::string& s, std::size_t& off) {
    if (off + 4 > s.size()) throw std::runtime_error("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(s[off + i])) << (8 * i);
    off += 4;
    return v;
}
inline std::int64_t get_i64(const std::string& s, std::size_t& off) {
    if (off + 8 > s.size()) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(s[off + i])) << (8 * i);
    off += 8;
    return std::int64_t(v);
}

} // namespace ckpt_detail

inline std::string serialize_checkpoint(const ModelCheckpoint& ck) {
    using namespace ckpt_detail;
    nlohmann::json j{{"format", ModelCheckpoint::kFormat},
                     {"config", ck.config.to_json()},
                     {"training_state", ck.training_state}};
    const std::string js = j.dump();
    std::string out;
    out.append(ModelCheckpoint::kMagic, 8);
    put_u32(out, std::uint32_t(js.size()));
    out += js;
    put_u32(out, std::uint32_t(ck.blobs.size()));
    for (const auto& [name, t] : ck.blobs) {
        put_u32(out, std::uint32_t(name.size()));
        out += name;
        put_u32(out, std::uint32_t(t.ndim()));
        for (auto d : t.shape()) put_i64(out, d);
        const std::size_t bytes = std::size_t(t.numel()) * 4;
        const std::size_t pos = out.size();
        out.resize(pos + bytes);
        std::memcpy(out.data() + pos, t.data(), bytes);
    }
    return out;
}

inline ModelCheckpoint deserialize_checkpoint(const std::string& buf) {
    using namespace ckpt_detail;
    if (buf.size() < 12 || std::memcmp(buf.data(), ModelCheckpoint::kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic (not an i2vwm-ckpt-v1 file)");
    std::size_t off = 8;
    const std::uint32_t jlen = get_u32(buf, off);
    if (off + jlen > buf.size()) throw std::runtime_error("checkpoint: truncated json");
    const nlohmann::json j = nlohmann::json::parse(buf.substr(off, jlen));
    off += jlen;
    if (j.value("format", "") != ModelCheckpoint::kFormat)
        throw std::runtime_error("checkpoint: unsupported format id");
    ModelCheckpoint ck;
    ck.config = ModelConfig::from_json(j.at("config"));
    ck.training_state = j.value("training_state", nlohmann::json::object());
    const std::uint32_t nblobs = get_u32(buf, off);
    for (std::uint32_t i = 0; i < nblobs; ++i) {
        const std::uint32_t nlen = get_u32(buf, off);
        if (off + nlen > buf.size()) throw std::runtime_error("checkpoint: truncated name");
        std::string name = buf.substr(off, nlen);
        off += nlen;
        const std::uint32_t ndim = get_u32(buf, off);
        std::vector<std::int64_t> shape(ndim);
        for (auto& d : shape) d = get_i64(buf, off);
        Tensor t(shape);
        const std::size_t bytes = std::size_t(t.numel()) * 4;
        if (off + bytes > buf.size()) throw std::runtime_error("checkpoint: truncated blob data");
        std::memcpy(t.data(), buf.data() + off, bytes);
        off += bytes;
        ck.blobs.emplace(std::move(name), std::move(t));
    }
    return ck;
}

// Atomic write: temp file in the target directory, then rename.
inline void save_checkpoint_file(const ModelCheckpoint& ck, const std::string& path) {
    const std::string data = serialize_checkpoint(ck);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp);
        f.write(data.data(), std::streamsize(data.size()));
        if (!f) throw std::runtime_error("checkpoint: short write on " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline ModelCheckpoint load_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(buf);
}

inline ModelCheckpoint checkpoint_from_model(WatermarkModel& model,
                                             nlohmann::json training_state = nlohmann::json::object()) {
    ModelCheckpoint ck;
    ck.config = model.config();
    ck.training_state = std::move(training_state);
    for (nn::Param* p : model.all_params()) ck.blobs.emplace(p->name, p->value);
    return ck;
}

// Builds a model from the checkpoint's embedded config and loads all
// parameter blobs into it.
inline std::unique_ptr<WatermarkModel> model_from_checkpoint(const ModelCheckpoint& ck) {
    auto model = std::make_unique<WatermarkModel>(ck.config);
    for (nn::Param* p : model->all_params()) {
        auto it = ck.blobs.find(p->name);
        if (it == ck.blobs.end())
            throw std::runtime_error("checkpoint: missing parameter blob '" + p->name + "'");
        if (it->second.shape() != p->value.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + p->name + "' (" +
                                     shape_str(it->second.shape()) + " vs " +
                                     shape_str(p->value.shape()) + ")");
        p->value = it->second;
    }
    return model;
}

} // namespace i2vwm
