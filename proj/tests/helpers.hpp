#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <zlib.h>

#include "vitxray/image.hpp"
#include "vitxray/rng.hpp"
#include "vitxray/tensor.hpp"

namespace testutil {

using vitxray::Rng;
using vitxray::Shape;
using vitxray::Tensor;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
    std::vector<double> d(vitxray::shape_numel(shape));
    for (auto& v : d) v = rng.uniform(lo, hi);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

// Central finite differences of a scalar-valued function of one input tensor,
// compared coordinate by coordinate against the analytic gradient.
// Returns the worst relative error over checked coordinates.
inline double finite_diff_worst_rel_err(const std::vector<Tensor>& inputs,
                                        const std::function<vitxray::Tensor()>& loss_fn, double h = 1e-5,
                                        std::size_t max_coords_per_input = 0) {
    for (auto t : inputs) t.zero_grad();
    Tensor loss = loss_fn();
    vitxray::backward(loss);
    double worst = 0.0;
    for (auto t : inputs) {
        std::vector<double> analytic = t.grad();
        std::size_t n = t.numel();
        std::size_t step = 1;
        if (max_coords_per_input && n > max_coords_per_input) step = n / max_coords_per_input;
        for (std::size_t i = 0; i < n; i += step) {
            double saved = t.mutable_data()[i];
            double err = std::numeric_limits<double>::infinity();
            // truncation error shrinks as h^2; a wrong gradient stays wrong
            for (double hh = h; hh >= h * 1e-3; hh /= 10.0) {
                t.mutable_data()[i] = saved + hh;
                double up = loss_fn().item();
                t.mutable_data()[i] = saved - hh;
                double down = loss_fn().item();
                t.mutable_data()[i] = saved;
                double numeric = (up - down) / (2.0 * hh);
                double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
                err = std::min(err, std::abs(numeric - analytic[i]) / denom);
                if (err < 1e-6) break;
            }
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// ---- independent oracles ---------------------------------------------------

inline std::vector<double> matmul_triple_loop(const std::vector<double>& a, const std::vector<double>& b,
                                              std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
}

// Textbook global histogram equalization with the cdf-min mapping.
inline vitxray::GrayImage global_hist_equalize(const vitxray::GrayImage& img) {
    std::vector<std::size_t> hist(256, 0);
    for (auto p : img.pixels) ++hist[p];
    std::vector<double> cdf(256, 0.0);
    double cum = 0.0;
    for (int v = 0; v < 256; ++v) {
        cum += hist[v];
        cdf[v] = cum;
    }
    int lo = 0;
    while (lo < 255 && hist[lo] == 0) ++lo;
    double cdf_min = cdf[lo];
    vitxray::GrayImage out(img.width, img.height);
    double denom = cum - cdf_min;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (denom <= 0.0) {
            out.pixels[i] = img.pixels[i];
        } else {
            double m = (cdf[img.pixels[i]] - cdf_min) / denom * 255.0;
            out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(m, 0.0, 255.0)));
        }
    }
    return out;
}

inline vitxray::GrayImage random_image(std::size_t w, std::size_t h, Rng& rng) {
    vitxray::GrayImage img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

// ---- minimal PNG encoder for fixtures (8-bit gray or RGB, filter 0) --------

inline void png_put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    auto be32 = [&](std::uint32_t v) {
        out.push_back(std::uint8_t(v >> 24));
        out.push_back(std::uint8_t(v >> 16));
        out.push_back(std::uint8_t(v >> 8));
        out.push_back(std::uint8_t(v));
    };
    be32(static_cast<std::uint32_t>(data.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    be32(crc);
}

inline std::vector<std::uint8_t> encode_png(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& pixels,
                                            bool rgb) {
    std::size_t bpp = rgb ? 3 : 1;
    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    auto be32v = [&](std::vector<std::uint8_t>& v, std::uint32_t x) {
        v.push_back(std::uint8_t(x >> 24));
        v.push_back(std::uint8_t(x >> 16));
        v.push_back(std::uint8_t(x >> 8));
        v.push_back(std::uint8_t(x));
    };
    be32v(ihdr, static_cast<std::uint32_t>(w));
    be32v(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                      // bit depth
    ihdr.push_back(rgb ? 2 : 0);            // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);                      // no interlace
    png_put_chunk(out, "IHDR", ihdr);

    std::vector<std::uint8_t> raw;
    for (std::size_t y = 0; y < h; ++y) {
        raw.push_back(0);  // filter type 0
        raw.insert(raw.end(), pixels.begin() + y * w * bpp, pixels.begin() + (y + 1) * w * bpp);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    compress(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()));
    comp.resize(comp_len);
    png_put_chunk(out, "IDAT", comp);
    png_put_chunk(out, "IEND", {});
    return out;
}

}  // namespace testutil
