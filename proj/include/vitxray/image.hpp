#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitxray/config.hpp"
#include "vitxray/rng.hpp"

namespace vitxray {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, width*height

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
    std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    bool operator==(const GrayImage&) const = default;
};

// Three identical channels, values in [0,1], channel-last layout.
struct ChannelImage {
    std::size_t width = 0;
    std::size_t height = 0;
    static constexpr std::size_t channels = 3;
    std::vector<double> data;  // h*w*3

    double at(std::size_t x, std::size_t y, std::size_t c) const { return data[(y * width + x) * channels + c]; }
};

struct AugmentSpec {
    double flip_horizontal_prob = 0.5;
    double flip_vertical_prob = 0.5;
    double rotation_limit_degrees = 270.0;
    std::uint8_t border_fill = 0;
    double brightness_limit = 0.4;
    double contrast_limit = 0.4;
    std::uint64_t rng_seed = 0;

    void validate() const {
        auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob_ok(flip_horizontal_prob) || !prob_ok(flip_vertical_prob))
            throw std::invalid_argument("augment spec: flip probabilities must be in [0,1]");
        if (rotation_limit_degrees < 0.0 || rotation_limit_degrees > 360.0)
            throw std::invalid_argument("augment spec: rotation limit must be in [0,360]");
        if (brightness_limit < 0.0 || contrast_limit < 0.0)
            throw std::invalid_argument("augment spec: brightness/contrast limits must be nonnegative");
    }
};

struct ClaheSpec {
    double clip_limit = 4.0;  // relative, OpenCV-style: effective = clip_limit * tile_area / 256
    std::size_t tile_rows = 8;
    std::size_t tile_cols = 8;

    void validate() const {
        if (!(clip_limit > 0.0)) throw std::invalid_argument("clahe spec: clip limit must be positive");
        if (tile_rows < 1 || tile_cols < 1) throw std::invalid_argument("clahe spec: tile grid extents must be >= 1");
    }
};

// Documented keys: flip_h, flip_v, rotation_limit, brightness_limit,
// contrast_limit, clahe_clip, clahe_tiles, seed.
inline void parse_augment_kv(const KvMap& kv, AugmentSpec& aug, ClaheSpec& clahe) {
    aug.flip_horizontal_prob = kv_double(kv, "flip_h", aug.flip_horizontal_prob);
    aug.flip_vertical_prob = kv_double(kv, "flip_v", aug.flip_vertical_prob);
    aug.rotation_limit_degrees = kv_double(kv, "rotation_limit", aug.rotation_limit_degrees);
    aug.brightness_limit = kv_double(kv, "brightness_limit", aug.brightness_limit);
    aug.contrast_limit = kv_double(kv, "contrast_limit", aug.contrast_limit);
    aug.rng_seed = kv_u64(kv, "seed", aug.rng_seed);
    std::string clip = kv_string(kv, "clahe_clip", "");
    if (!clip.empty()) clahe.clip_limit = (clip == "inf") ? std::numeric_limits<double>::infinity() : std::stod(clip);
    std::string tiles = kv_string(kv, "clahe_tiles", "");
    if (!tiles.empty()) {
        auto x = tiles.find('x');
        if (x == std::string::npos) throw std::runtime_error("clahe_tiles: expected RxC, got '" + tiles + "'");
        clahe.tile_rows = std::stoul(tiles.substr(0, x));
        clahe.tile_cols = std::stoul(tiles.substr(x + 1));
    }
    aug.validate();
    clahe.validate();
}

// ---- CLAHE -----------------------------------------------------------------

namespace detail {

// Per-tile LUT via the clipped histogram. Mapping follows the classic
// cdf-min histogram-equalization formula; a single-valued tile keeps the
// identity map so degenerate histograms are fixed points.
inline std::array<std::uint8_t, 256> tile_lut(const std::vector<std::uint32_t>& hist, std::size_t count,
                                              double clip_limit) {
    std::array<std::uint8_t, 256> lut{};
    std::uint8_t lo = 0, hi = 255;
    while (lo < 255 && hist[lo] == 0) ++lo;
    while (hi > 0 && hist[hi] == 0) --hi;
    if (lo >= hi) {  // single intensity (or empty): identity
        for (int v = 0; v < 256; ++v) lut[v] = static_cast<std::uint8_t>(v);
        return lut;
    }
    std::vector<double> h(hist.begin(), hist.end());
    if (std::isfinite(clip_limit)) {
        double limit = std::max(1.0, clip_limit * static_cast<double>(count) / 256.0);
        double excess = 0.0;
        for (auto& b : h)
            if (b > limit) {
                excess += b - limit;
                b = limit;
            }
        double redist = excess / 256.0;
        for (auto& b : h) b += redist;
    }
    std::vector<double> cdf(256);
    double cum = 0.0;
    for (int v = 0; v < 256; ++v) {
        cum += h[v];
        cdf[v] = cum;
    }
    double cdf_min = cdf[lo];
    double denom = cum - cdf_min;
    if (denom <= 0.0) {
        for (int v = 0; v < 256; ++v) lut[v] = static_cast<std::uint8_t>(v);
        return lut;
    }
    for (int v = 0; v < 256; ++v) {
        double m = (cdf[v] - cdf_min) / denom * 255.0;
        lut[v] = static_cast<std::uint8_t>(std::lround(std::clamp(m, 0.0, 255.0)));
    }
    return lut;
}

}  // namespace detail

inline GrayImage clahe(const GrayImage& img, const ClaheSpec& spec) {
    spec.validate();
    if (spec.tile_rows > img.height || spec.tile_cols > img.width)
        throw std::invalid_argument("clahe: tile grid " + std::to_string(spec.tile_rows) + "x" +
                                    std::to_string(spec.tile_cols) + " larger than image " +
                                    std::to_string(img.height) + "x" + std::to_string(img.width));
    std::size_t tr = spec.tile_rows, tc = spec.tile_cols;
    std::vector<std::array<std::uint8_t, 256>> luts(tr * tc);
    std::vector<double> cx(tc), cy(tr);  // tile centers
    auto tile_x0 = [&](std::size_t j) { return j * img.width / tc; };
    auto tile_x1 = [&](std::size_t j) { return (j + 1) * img.width / tc; };
    auto tile_y0 = [&](std::size_t i) { return i * img.height / tr; };
    auto tile_y1 = [&](std::size_t i) { return (i + 1) * img.height / tr; };
    for (std::size_t i = 0; i < tr; ++i)
        for (std::size_t j = 0; j < tc; ++j) {
            std::vector<std::uint32_t> hist(256, 0);
            std::size_t x0 = tile_x0(j), x1 = tile_x1(j), y0 = tile_y0(i), y1 = tile_y1(i);
            for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t x = x0; x < x1; ++x) ++hist[img.at(x, y)];
            luts[i * tc + j] = detail::tile_lut(hist, (x1 - x0) * (y1 - y0), spec.clip_limit);
            cx[j] = (tile_x0(j) + tile_x1(j)) / 2.0 - 0.5;
            cy[i] = (tile_y0(i) + tile_y1(i)) / 2.0 - 0.5;
        }
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        // bracketing tile rows for interpolation
        std::size_t i0 = 0;
        while (i0 + 1 < tr && cy[i0 + 1] <= static_cast<double>(y)) ++i0;
        std::size_t i1 = (i0 + 1 < tr && static_cast<double>(y) >= cy[i0]) ? i0 + 1 : i0;
        if (static_cast<double>(y) < cy[0]) i0 = i1 = 0;
        double wy = (i0 == i1) ? 0.0 : (static_cast<double>(y) - cy[i0]) / (cy[i1] - cy[i0]);
        wy = std::clamp(wy, 0.0, 1.0);
        for (std::size_t x = 0; x < img.width; ++x) {
            std::size_t j0 = 0;
            while (j0 + 1 < tc && cx[j0 + 1] <= static_cast<double>(x)) ++j0;
            std::size_t j1 = (j0 + 1 < tc && static_cast<double>(x) >= cx[j0]) ? j0 + 1 : j0;
            if (static_cast<double>(x) < cx[0]) j0 = j1 = 0;
            double wx = (j0 == j1) ? 0.0 : (static_cast<double>(x) - cx[j0]) / (cx[j1] - cx[j0]);
            wx = std::clamp(wx, 0.0, 1.0);
            std::uint8_t v = img.at(x, y);
            double m = (1 - wy) * ((1 - wx) * luts[i0 * tc + j0][v] + wx * luts[i0 * tc + j1][v]) +
                       wy * ((1 - wx) * luts[i1 * tc + j0][v] + wx * luts[i1 * tc + j1][v]);
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(m, 0.0, 255.0)));
        }
    }
    return out;
}

// ---- geometric / photometric ops ------------------------------------------

inline GrayImage flip_horizontal(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
    return out;
}

inline GrayImage flip_vertical(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) out.at(x, y) = img.at(x, img.height - 1 - y);
    return out;
}

inline GrayImage random_flip(const GrayImage& img, const AugmentSpec& spec, Rng& rng) {
    bool h = rng.bernoulli(spec.flip_horizontal_prob);
    bool v = rng.bernoulli(spec.flip_vertical_prob);
    GrayImage out = img;
    if (h) out = flip_horizontal(out);
    if (v) out = flip_vertical(out);
    return out;
}

namespace detail {

inline double bilinear_sample_border(const GrayImage& img, double xs, double ys, std::uint8_t fill) {
    double x0f = std::floor(xs), y0f = std::floor(ys);
    long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
    double fx = xs - x0f, fy = ys - y0f;
    auto px = [&](long x, long y) -> double {
        if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height)) return fill;
        return img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    };
    return (1 - fy) * ((1 - fx) * px(x0, y0) + fx * px(x0 + 1, y0)) +
           fy * ((1 - fx) * px(x0, y0 + 1) + fx * px(x0 + 1, y0 + 1));
}

}  // namespace detail

// Rotation about the image center by inverse mapping with bilinear sampling;
// samples outside the source take the constant border fill.
inline GrayImage rotate(const GrayImage& img, double degrees, std::uint8_t border_fill) {
    constexpr double kPi = 3.14159265358979323846;
    double theta = degrees * kPi / 180.0;
    double c = std::cos(theta), s = std::sin(theta);
    double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            double dx = x - cx, dy = y - cy;
            double xs = cx + dx * c - dy * s;
            double ys = cy + dx * s + dy * c;
            double v = detail::bilinear_sample_border(img, xs, ys, border_fill);
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    return out;
}

inline GrayImage random_rotate(const GrayImage& img, const AugmentSpec& spec, Rng& rng) {
    double theta = rng.uniform(-spec.rotation_limit_degrees, spec.rotation_limit_degrees);
    return rotate(img, theta, spec.border_fill);
}

// out = clamp((1+alpha)*pixel + beta*255, 0, 255), rounded
inline GrayImage brightness_contrast(const GrayImage& img, double alpha, double beta) {
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        double v = (1.0 + alpha) * img.pixels[i] + beta * 255.0;
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return out;
}

inline GrayImage random_brightness_contrast(const GrayImage& img, const AugmentSpec& spec, Rng& rng) {
    double alpha = rng.uniform(-spec.contrast_limit, spec.contrast_limit);
    double beta = rng.uniform(-spec.brightness_limit, spec.brightness_limit);
    return brightness_contrast(img, alpha, beta);
}

// flip -> rotate -> brightness/contrast
inline GrayImage augment(const GrayImage& img, const AugmentSpec& spec, Rng& rng) {
    GrayImage out = random_flip(img, spec, rng);
    out = random_rotate(out, spec, rng);
    return random_brightness_contrast(out, spec, rng);
}

// Bilinear resize with half-pixel-center alignment and clamp-to-edge sampling.
inline GrayImage resize_bilinear(const GrayImage& img, std::size_t target_w, std::size_t target_h) {
    if (target_w == 0 || target_h == 0) throw std::invalid_argument("resize_bilinear: zero target extent");
    if (img.width == 0 || img.height == 0) throw std::invalid_argument("resize_bilinear: empty source image");
    if (target_w == img.width && target_h == img.height) return img;
    GrayImage out(target_w, target_h);
    double sx = static_cast<double>(img.width) / target_w;
    double sy = static_cast<double>(img.height) / target_h;
    for (std::size_t y = 0; y < target_h; ++y) {
        double ys = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
        std::size_t y0 = static_cast<std::size_t>(ys);
        std::size_t y1 = std::min(y0 + 1, img.height - 1);
        double fy = ys - y0;
        for (std::size_t x = 0; x < target_w; ++x) {
            double xs = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
            std::size_t x0 = static_cast<std::size_t>(xs);
            std::size_t x1 = std::min(x0 + 1, img.width - 1);
            double fx = xs - x0;
            double v = (1 - fy) * ((1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
                       fy * ((1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        }
    }
    return out;
}

// Grayscale to fake RGB: three identical channels scaled to [0,1].
inline ChannelImage stack_channels(const GrayImage& img) {
    ChannelImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(img.pixels.size() * ChannelImage::channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        double v = img.pixels[i] / 255.0;
        out.data[3 * i] = v;
        out.data[3 * i + 1] = v;
        out.data[3 * i + 2] = v;
    }
    return out;
}

// Grow a class to target_count: originals first, then augmented copies drawn
// round-robin with per-copy derived seeds.
inline std::vector<GrayImage> augment_upsample(const std::vector<GrayImage>& images, std::size_t target_count,
                                               const AugmentSpec& spec) {
    if (images.empty()) throw std::invalid_argument("augment_upsample: empty input list");
    if (target_count < images.size())
        throw std::invalid_argument("augment_upsample: target " + std::to_string(target_count) +
                                    " below input count " + std::to_string(images.size()));
    std::vector<GrayImage> out = images;
    out.reserve(target_count);
    for (std::size_t i = 0; out.size() < target_count; ++i) {
        Rng rng(Rng::derive(spec.rng_seed, i));
        out.push_back(augment(images[i % images.size()], spec, rng));
    }
    return out;
}

}  // namespace vitxray
