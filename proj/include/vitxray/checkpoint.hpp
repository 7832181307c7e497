#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "vitxray/tensor.hpp"
#include "vitxray/vit.hpp"

namespace vitxray {

// Checkpoint container: magic, serialized ViTConfig, then (name, shape, raw
// little-endian f64 data) records, closed by a CRC32 of everything before it.
// Round trips are byte-exact.

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'V', 'X', 'C', 'K', 'P', 'T', '0', '1'};

inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(b, bits);
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}
inline double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = get_u64(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

struct CkptReader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    const std::uint8_t* take(std::size_t n) {
        if (pos + n > buf.size()) throw CheckpointError("checkpoint: truncated file");
        const std::uint8_t* p = buf.data() + pos;
        pos += n;
        return p;
    }
    std::uint64_t u64() { return get_u64(take(8)); }
    double f64() { return get_f64(take(8)); }
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const ViTParams& params, const ViTConfig& cfg) {
    std::vector<std::uint8_t> b(detail::kCkptMagic, detail::kCkptMagic + 8);
    detail::put_u64(b, cfg.image_size);
    detail::put_u64(b, cfg.patch_size);
    detail::put_u64(b, cfg.in_channels);
    detail::put_u64(b, cfg.hidden_dim);
    detail::put_u64(b, cfg.mlp_dim);
    detail::put_u64(b, cfg.num_heads);
    detail::put_u64(b, cfg.num_layers);
    detail::put_u64(b, cfg.num_classes);
    detail::put_f64(b, cfg.layernorm_eps);
    auto named = params.named();
    detail::put_u64(b, named.size());
    for (const auto& [name, t] : named) {
        detail::put_u64(b, name.size());
        b.insert(b.end(), name.begin(), name.end());
        detail::put_u64(b, t.rank());
        for (auto e : t.shape()) detail::put_u64(b, e);
        for (double v : t.data()) detail::put_f64(b, v);
    }
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(0, b.data(), static_cast<uInt>(b.size())));
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return b;
}

inline std::pair<ViTParams, ViTConfig> decode_checkpoint(const std::vector<std::uint8_t>& b) {
    if (b.size() < 12 || std::memcmp(b.data(), detail::kCkptMagic, 8) != 0)
        throw CheckpointError("checkpoint: bad magic (wrong file or version)");
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(b[b.size() - 4 + i]) << (8 * i);
    std::uint32_t computed =
        static_cast<std::uint32_t>(crc32(0, b.data(), static_cast<uInt>(b.size() - 4)));
    if (stored != computed) throw CheckpointError("checkpoint: checksum mismatch (corrupt or truncated file)");

    detail::CkptReader r{b, 8};
    ViTConfig cfg;
    cfg.image_size = r.u64();
    cfg.patch_size = r.u64();
    cfg.in_channels = r.u64();
    cfg.hidden_dim = r.u64();
    cfg.mlp_dim = r.u64();
    cfg.num_heads = r.u64();
    cfg.num_layers = r.u64();
    cfg.num_classes = r.u64();
    cfg.layernorm_eps = r.f64();
    cfg.validate();

    ViTParams params = init_params(cfg, 0);
    auto named = params.named();
    std::uint64_t n = r.u64();
    if (n != named.size())
        throw CheckpointError("checkpoint: expected " + std::to_string(named.size()) + " arrays, file has " +
                              std::to_string(n));
    for (auto& [name, t] : named) {
        std::uint64_t len = r.u64();
        std::string fname(reinterpret_cast<const char*>(r.take(len)), len);
        if (fname != name) throw CheckpointError("checkpoint: expected array '" + name + "', found '" + fname + "'");
        std::uint64_t rank = r.u64();
        Shape shape(rank);
        for (auto& e : shape) e = r.u64();
        if (shape != t.shape())
            throw CheckpointError("checkpoint: array '" + name + "' has shape " + shape_str(shape) + ", expected " +
                                  shape_str(t.shape()));
        auto& dst = t.mutable_data();
        for (auto& v : dst) v = r.f64();
    }
    return {params, cfg};
}

inline void save_checkpoint(const ViTParams& params, const ViTConfig& cfg, const std::string& path) {
    auto bytes = encode_checkpoint(params, cfg);
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to checkpoint: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::pair<ViTParams, ViTConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace vitxray
