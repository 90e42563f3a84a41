#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/optim.hpp"
#include "voxseek/num/tensor.hpp"

namespace voxseek::pipeline {

constexpr char kCheckpointMagic[4] = {'V', 'S', 'K', '1'};
constexpr uint32_t kCheckpointVersion = 1;

/// Versioned named-tensor container: magic+version header, model kind tag,
/// config echo, then length-prefixed tensors as little-endian float32.
struct Checkpoint {
    struct NamedTensor {
        std::string name;
        std::vector<int> shape;
        std::vector<float> data;
    };

    std::string kind;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<NamedTensor> tensors;

    std::optional<std::string> config_value(const std::string& key) const {
        for (const auto& [k, v] : config)
            if (k == key) return v;
        return std::nullopt;
    }
};

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("checkpoint truncated while reading " + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& what) {
    uint32_t len = get_u32(in, what + " length");
    if (len > (1u << 20)) throw FormatError("checkpoint: implausible string length in " + what);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw FormatError("checkpoint truncated while reading " + what);
    return s;
}

inline void put_f32(std::ostream& out, const float* data, size_t n) {
    static_assert(sizeof(float) == 4);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        put_u32(out, bits);
    }
}

} // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& cp) {
    out.write(kCheckpointMagic, 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_string(out, cp.kind);
    detail::put_u32(out, static_cast<uint32_t>(cp.config.size()));
    for (const auto& [k, v] : cp.config) {
        detail::put_string(out, k);
        detail::put_string(out, v);
    }
    detail::put_u32(out, static_cast<uint32_t>(cp.tensors.size()));
    for (const auto& t : cp.tensors) {
        detail::put_string(out, t.name);
        detail::put_u32(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) detail::put_u32(out, static_cast<uint32_t>(d));
        detail::put_f32(out, t.data.data(), t.data.size());
    }
}

inline Checkpoint read_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic, not a VSK1 file");
    uint32_t version = detail::get_u32(in, "version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint cp;
    cp.kind = detail::get_string(in, "model kind");
    uint32_t nconf = detail::get_u32(in, "config count");
    for (uint32_t i = 0; i < nconf; ++i) {
        std::string k = detail::get_string(in, "config key");
        std::string v = detail::get_string(in, "config value");
        cp.config.emplace_back(std::move(k), std::move(v));
    }
    uint32_t ntens = detail::get_u32(in, "tensor count");
    for (uint32_t i = 0; i < ntens; ++i) {
        Checkpoint::NamedTensor t;
        t.name = detail::get_string(in, "tensor name");
        uint32_t ndim = detail::get_u32(in, "tensor '" + t.name + "' rank");
        if (ndim > 8) throw FormatError("checkpoint: implausible rank for tensor '" + t.name + "'");
        long long numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            uint32_t dim = detail::get_u32(in, "tensor '" + t.name + "' shape");
            if (dim == 0 || dim > (1u << 28)) throw FormatError("checkpoint: bad dimension in tensor '" + t.name + "'");
            t.shape.push_back(static_cast<int>(dim));
            numel *= dim;
        }
        if (numel > (1ll << 28)) throw FormatError("checkpoint: tensor '" + t.name + "' too large");
        t.data.resize(static_cast<size_t>(numel));
        for (long long j = 0; j < numel; ++j) {
            uint32_t bits = detail::get_u32(in, "tensor '" + t.name + "' data");
            float f;
            std::memcpy(&f, &bits, 4);
            t.data[static_cast<size_t>(j)] = f;
        }
        cp.tensors.push_back(std::move(t));
    }
    return cp;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write checkpoint: " + path);
    write_checkpoint(f, cp);
    if (!f) throw InputError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open checkpoint: " + path);
    return read_checkpoint(f);
}

/// Snapshot every parameter of a model into a checkpoint.
inline Checkpoint checkpoint_from_params(const std::string& kind, const num::ParamSet& params,
                                         std::vector<std::pair<std::string, std::string>> config) {
    Checkpoint cp;
    cp.kind = kind;
    cp.config = std::move(config);
    for (const num::Parameter* p : params.all())
        cp.tensors.push_back({p->name, p->value.shape, p->value.v});
    return cp;
}

/// Restore parameters by name; every model parameter must be present with a
/// matching shape.
inline void load_params_from_checkpoint(const Checkpoint& cp, num::ParamSet& params) {
    for (num::Parameter* p : params.all()) {
        const Checkpoint::NamedTensor* found = nullptr;
        for (const auto& t : cp.tensors)
            if (t.name == p->name) {
                found = &t;
                break;
            }
        if (!found) throw FormatError("checkpoint: missing tensor '" + p->name + "'");
        if (found->shape != p->value.shape)
            throw ShapeError("checkpoint: tensor '" + p->name + "' has shape mismatch");
        p->value.v = found->data;
    }
}

} // namespace voxseek::pipeline
