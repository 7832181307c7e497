#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "vitxray/image.hpp"

namespace vitxray {

struct ImageDecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- PGM (P5, maxval 255) --------------------------------------------------

namespace detail {

inline int pgm_next_token(const std::vector<std::uint8_t>& b, std::size_t& pos, std::string& tok) {
    // skip whitespace and '#' comments
    while (pos < b.size()) {
        char c = static_cast<char>(b[pos]);
        if (c == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    tok.clear();
    while (pos < b.size()) {
        char c = static_cast<char>(b[pos]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    return tok.empty() ? -1 : 0;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    std::string tok;
    if (detail::pgm_next_token(bytes, pos, tok) || tok != "P5") throw ImageDecodeError("PGM: missing P5 magic");
    auto num = [&](const char* what) -> std::size_t {
        if (detail::pgm_next_token(bytes, pos, tok)) throw ImageDecodeError(std::string("PGM: truncated header at ") + what);
        try {
            return std::stoul(tok);
        } catch (const std::exception&) {
            throw ImageDecodeError(std::string("PGM: bad ") + what + " '" + tok + "'");
        }
    };
    std::size_t w = num("width"), h = num("height"), maxval = num("maxval");
    if (w == 0 || h == 0) throw ImageDecodeError("PGM: zero extent");
    if (maxval != 255) throw ImageDecodeError("PGM: unsupported maxval " + std::to_string(maxval) + " (expected 255)");
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + w * h) throw ImageDecodeError("PGM: truncated pixel data");
    GrayImage img(w, h);
    std::memcpy(img.pixels.data(), bytes.data() + pos, w * h);
    return img;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

// ---- PNG (8-bit grayscale or RGB, non-interlaced) --------------------------

namespace detail {

inline std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

inline std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    int p = int(a) + int(b) - int(c);
    int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) throw ImageDecodeError("PNG: bad signature");
    std::size_t pos = 8;
    std::size_t w = 0, h = 0;
    int bit_depth = 0, color_type = -1;
    std::vector<std::uint8_t> idat;
    bool seen_iend = false;
    while (pos + 8 <= bytes.size() && !seen_iend) {
        std::uint32_t len = detail::be32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw ImageDecodeError("PNG: truncated chunk");
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) throw ImageDecodeError("PNG: bad IHDR length");
            w = detail::be32(payload);
            h = detail::be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw ImageDecodeError("PNG: interlaced images unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_iend) throw ImageDecodeError("PNG: missing IEND (truncated stream)");
    if (w == 0 || h == 0) throw ImageDecodeError("PNG: missing or empty IHDR");
    if (bit_depth != 8) throw ImageDecodeError("PNG: bit depth " + std::to_string(bit_depth) + " unsupported (need 8)");
    if (color_type != 0 && color_type != 2)
        throw ImageDecodeError("PNG: color type " + std::to_string(color_type) + " unsupported (need gray or RGB)");
    std::size_t bpp = color_type == 0 ? 1 : 3;
    std::size_t stride = w * bpp;
    std::vector<std::uint8_t> raw(h * (stride + 1));
    uLongf raw_len = raw.size();
    if (uncompress(raw.data(), &raw_len, idat.data(), idat.size()) != Z_OK || raw_len != raw.size())
        throw ImageDecodeError("PNG: corrupt or truncated IDAT stream");

    // unfilter
    std::vector<std::uint8_t> prev(stride, 0), cur(stride);
    GrayImage img(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        const std::uint8_t* row = raw.data() + y * (stride + 1);
        std::uint8_t filter = row[0];
        for (std::size_t i = 0; i < stride; ++i) {
            std::uint8_t x = row[1 + i];
            std::uint8_t a = i >= bpp ? cur[i - bpp] : 0;
            std::uint8_t b = prev[i];
            std::uint8_t c = i >= bpp ? prev[i - bpp] : 0;
            switch (filter) {
                case 0: cur[i] = x; break;
                case 1: cur[i] = x + a; break;
                case 2: cur[i] = x + b; break;
                case 3: cur[i] = x + std::uint8_t((int(a) + int(b)) / 2); break;
                case 4: cur[i] = x + detail::paeth(a, b, c); break;
                default: throw ImageDecodeError("PNG: bad filter type " + std::to_string(filter));
            }
        }
        for (std::size_t x = 0; x < w; ++x) {
            if (bpp == 1) {
                img.at(x, y) = cur[x];
            } else {
                // luma = round(0.299 R + 0.587 G + 0.114 B)
                double luma = 0.299 * cur[3 * x] + 0.587 * cur[3 * x + 1] + 0.114 * cur[3 * x + 2];
                img.at(x, y) = static_cast<std::uint8_t>(std::lround(luma));
            }
        }
        std::swap(prev, cur);
    }
    return img;
}

inline GrayImage decode_image(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P') return decode_png(bytes);
    throw ImageDecodeError("unsupported image format (expected PGM P5 or PNG)");
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline GrayImage load_image(const std::string& path) {
    try {
        return decode_image(read_file_bytes(path));
    } catch (const ImageDecodeError& e) {
        throw ImageDecodeError(path + ": " + e.what());
    }
}

inline void save_pgm(const GrayImage& img, const std::string& path) {
    auto bytes = encode_pgm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace vitxray
