#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vitxray/image.hpp"
#include "vitxray/rng.hpp"
#include "vitxray/tensor.hpp"

namespace vitxray {

struct ViTConfig {
    std::size_t image_size = 224;
    std::size_t patch_size = 32;
    std::size_t in_channels = 3;
    std::size_t hidden_dim = 768;
    std::size_t mlp_dim = 3072;
    std::size_t num_heads = 12;
    std::size_t num_layers = 12;
    std::size_t num_classes = 1;  // single sigmoid logit
    double layernorm_eps = 1e-6;

    void validate() const {
        if (patch_size == 0 || image_size % patch_size != 0)
            throw std::invalid_argument("vit config: image_size " + std::to_string(image_size) +
                                        " not divisible by patch_size " + std::to_string(patch_size));
        if (num_heads == 0 || hidden_dim % num_heads != 0)
            throw std::invalid_argument("vit config: hidden_dim " + std::to_string(hidden_dim) +
                                        " not divisible by num_heads " + std::to_string(num_heads));
        if (hidden_dim == 0 || mlp_dim == 0 || num_layers == 0 || in_channels == 0 || num_classes == 0)
            throw std::invalid_argument("vit config: extents must be positive");
        if (layernorm_eps <= 0.0) throw std::invalid_argument("vit config: layernorm_eps must be positive");
    }

    std::size_t patches_per_side() const { return image_size / patch_size; }
    std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
    std::size_t seq_len() const { return num_patches() + 1; }  // + class token
    std::size_t patch_dim() const { return patch_size * patch_size * in_channels; }
    std::size_t head_dim() const { return hidden_dim / num_heads; }
};

struct EncoderLayerParams {
    Tensor ln1_gamma, ln1_beta;
    Tensor qkv_w, qkv_b;      // (D, 3D), (3D)
    Tensor out_w, out_b;      // (D, D), (D)
    Tensor ln2_gamma, ln2_beta;
    Tensor mlp1_w, mlp1_b;    // (D, M), (M)
    Tensor mlp2_w, mlp2_b;    // (M, D), (D)
};

struct ViTParams {
    Tensor patch_w, patch_b;  // (P*P*C, D), (D)
    Tensor class_token;       // (D)
    Tensor pos_emb;           // (S, D)
    std::vector<EncoderLayerParams> layers;
    Tensor final_ln_gamma, final_ln_beta;
    Tensor head_w, head_b;    // (D, num_classes), (num_classes)

    std::vector<std::pair<std::string, Tensor>> named() const {
        std::vector<std::pair<std::string, Tensor>> v;
        v.emplace_back("patch_w", patch_w);
        v.emplace_back("patch_b", patch_b);
        v.emplace_back("class_token", class_token);
        v.emplace_back("pos_emb", pos_emb);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            std::string p = "layer" + std::to_string(i) + ".";
            v.emplace_back(p + "ln1_gamma", l.ln1_gamma);
            v.emplace_back(p + "ln1_beta", l.ln1_beta);
            v.emplace_back(p + "qkv_w", l.qkv_w);
            v.emplace_back(p + "qkv_b", l.qkv_b);
            v.emplace_back(p + "out_w", l.out_w);
            v.emplace_back(p + "out_b", l.out_b);
            v.emplace_back(p + "ln2_gamma", l.ln2_gamma);
            v.emplace_back(p + "ln2_beta", l.ln2_beta);
            v.emplace_back(p + "mlp1_w", l.mlp1_w);
            v.emplace_back(p + "mlp1_b", l.mlp1_b);
            v.emplace_back(p + "mlp2_w", l.mlp2_w);
            v.emplace_back(p + "mlp2_b", l.mlp2_b);
        }
        v.emplace_back("final_ln_gamma", final_ln_gamma);
        v.emplace_back("final_ln_beta", final_ln_beta);
        v.emplace_back("head_w", head_w);
        v.emplace_back("head_b", head_b);
        return v;
    }

    std::vector<Tensor> all() const {
        std::vector<Tensor> v;
        for (auto& [n, t] : named()) v.push_back(t);
        return v;
    }

    void zero_grad() {
        for (auto& t : all()) t.zero_grad();
    }
};

namespace detail {

// truncated normal: resample draws with |z| > 2
inline Tensor trunc_normal(Shape shape, double std_dev, Rng& rng) {
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) {
        double z;
        do {
            // Box-Muller from the stable uniform source
            double u1 = rng.uniform01(), u2 = rng.uniform01();
            if (u1 <= 0.0) u1 = 1e-300;
            z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        } while (std::abs(z) > 2.0);
        v = z * std_dev;
    }
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

}  // namespace detail

// Truncated-normal(0.02) projections, ones for LN gammas, zeros for biases,
// class token and position embeddings.
inline ViTParams init_params(const ViTConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    std::size_t D = cfg.hidden_dim, M = cfg.mlp_dim, S = cfg.seq_len();
    ViTParams p;
    p.patch_w = detail::trunc_normal({cfg.patch_dim(), D}, 0.02, rng);
    p.patch_b = Tensor::zeros({D}, true);
    p.class_token = Tensor::zeros({D}, true);
    p.pos_emb = Tensor::zeros({S, D}, true);
    for (std::size_t i = 0; i < cfg.num_layers; ++i) {
        EncoderLayerParams l;
        l.ln1_gamma = Tensor::full({D}, 1.0, true);
        l.ln1_beta = Tensor::zeros({D}, true);
        l.qkv_w = detail::trunc_normal({D, 3 * D}, 0.02, rng);
        l.qkv_b = Tensor::zeros({3 * D}, true);
        l.out_w = detail::trunc_normal({D, D}, 0.02, rng);
        l.out_b = Tensor::zeros({D}, true);
        l.ln2_gamma = Tensor::full({D}, 1.0, true);
        l.ln2_beta = Tensor::zeros({D}, true);
        l.mlp1_w = detail::trunc_normal({D, M}, 0.02, rng);
        l.mlp1_b = Tensor::zeros({M}, true);
        l.mlp2_w = detail::trunc_normal({M, D}, 0.02, rng);
        l.mlp2_b = Tensor::zeros({D}, true);
        p.layers.push_back(std::move(l));
    }
    p.final_ln_gamma = Tensor::full({D}, 1.0, true);
    p.final_ln_beta = Tensor::zeros({D}, true);
    p.head_w = detail::trunc_normal({D, cfg.num_classes}, 0.02, rng);
    p.head_b = Tensor::zeros({cfg.num_classes}, true);
    return p;
}

// Closed-form parameter count implied by the config.
inline std::size_t param_count(const ViTConfig& cfg) {
    cfg.validate();
    std::size_t D = cfg.hidden_dim, M = cfg.mlp_dim, S = cfg.seq_len();
    std::size_t per_layer = 2 * D                 // ln1
                          + D * 3 * D + 3 * D     // qkv
                          + D * D + D             // attention out
                          + 2 * D                 // ln2
                          + D * M + M             // mlp1
                          + M * D + D;            // mlp2
    return cfg.patch_dim() * D + D                // patch projection
         + D                                      // class token
         + S * D                                  // position embeddings
         + cfg.num_layers * per_layer
         + 2 * D                                  // final ln
         + D * cfg.num_classes + cfg.num_classes; // head
}

// Flatten each non-overlapping patch (row-major over patch pixels, channel
// fastest) and project to hidden_dim. Returns (B, num_patches, D).
inline Tensor patch_embed(const std::vector<ChannelImage>& batch, const ViTParams& params, const ViTConfig& cfg) {
    std::size_t B = batch.size(), N = cfg.num_patches(), P = cfg.patch_size, C = cfg.in_channels;
    std::size_t pd = cfg.patch_dim(), side = cfg.patches_per_side();
    std::vector<double> patches(B * N * pd);
    for (std::size_t b = 0; b < B; ++b) {
        const ChannelImage& img = batch[b];
        if (img.width != cfg.image_size || img.height != cfg.image_size)
            throw std::invalid_argument("patch_embed: image " + std::to_string(img.width) + "x" +
                                        std::to_string(img.height) + " does not match config image_size " +
                                        std::to_string(cfg.image_size));
        for (std::size_t py = 0; py < side; ++py)
            for (std::size_t px = 0; px < side; ++px) {
                double* dst = patches.data() + ((b * N + py * side + px) * pd);
                for (std::size_t y = 0; y < P; ++y)
                    for (std::size_t x = 0; x < P; ++x)
                        for (std::size_t c = 0; c < C; ++c)
                            *dst++ = img.at(px * P + x, py * P + y, c);
            }
    }
    Tensor x = Tensor::from_data({B, N, pd}, std::move(patches));
    return add_bias(matmul(x, params.patch_w), params.patch_b);
}

// Prepend the class token and add position embeddings. (B,N,D) -> (B,S,D).
inline Tensor add_class_and_position(const Tensor& x, const ViTParams& params) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw std::invalid_argument("add_class_and_position: expected rank-3 input, got " + shape_str(s));
    std::size_t B = s[0], N = s[1], D = s[2];
    std::size_t S = N + 1;
    if (params.pos_emb.shape() != Shape{S, D})
        throw std::invalid_argument("add_class_and_position: pos_emb " + shape_str(params.pos_emb.shape()) +
                                    " does not match sequence " + shape_str({S, D}));

    auto xi = x.impl();
    auto ci = params.class_token.impl();
    auto pi = params.pos_emb.impl();
    std::vector<double> out(B * S * D);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t j = 0; j < D; ++j) out[(b * S) * D + j] = ci->data[j] + pi->data[j];
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j < D; ++j)
                out[(b * S + n + 1) * D + j] = xi->data[(b * N + n) * D + j] + pi->data[(n + 1) * D + j];
    }
    return detail::make_result({B, S, D}, std::move(out), {x, params.class_token, params.pos_emb},
                               [xi, ci, pi, B, N, D, S](TensorImpl& self) {
        auto& gx = xi->grad_buffer();
        auto& gc = ci->grad_buffer();
        auto& gp = pi->grad_buffer();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t j = 0; j < D; ++j) {
                gc[j] += self.grad[(b * S) * D + j];
                gp[j] += self.grad[(b * S) * D + j];
            }
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t j = 0; j < D; ++j) {
                    double g = self.grad[(b * S + n + 1) * D + j];
                    gx[(b * N + n) * D + j] += g;
                    gp[(n + 1) * D + j] += g;
                }
        }
    });
}

// Multi-headed scaled-dot-product self-attention over (B,S,D). If attn_maps
// is non-null, the per-head softmax weights (B,S,S) are appended to it.
inline Tensor self_attention(const Tensor& x, const EncoderLayerParams& l, const ViTConfig& cfg,
                             std::vector<Tensor>* attn_maps = nullptr) {
    std::size_t D = cfg.hidden_dim, H = cfg.num_heads, dh = cfg.head_dim();
    if (x.shape().back() != D)
        throw std::invalid_argument("self_attention: last extent " + std::to_string(x.shape().back()) +
                                    " != hidden_dim " + std::to_string(D));
    Tensor qkv = add_bias(matmul(x, l.qkv_w), l.qkv_b);  // (B,S,3D)
    Tensor q = slice_lastdim(qkv, 0, D);
    Tensor k = slice_lastdim(qkv, D, D);
    Tensor v = slice_lastdim(qkv, 2 * D, D);
    double scl = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> heads;
    heads.reserve(H);
    for (std::size_t h = 0; h < H; ++h) {
        Tensor qh = slice_lastdim(q, h * dh, dh);
        Tensor kh = slice_lastdim(k, h * dh, dh);
        Tensor vh = slice_lastdim(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose_last2(kh)), scl);  // (B,S,S)
        Tensor weights = softmax_lastdim(scores);
        if (attn_maps) attn_maps->push_back(weights);
        heads.push_back(matmul(weights, vh));  // (B,S,dh)
    }
    Tensor merged = concat_lastdim(heads);  // (B,S,D)
    return add_bias(matmul(merged, l.out_w), l.out_b);
}

inline Tensor mlp_block(const Tensor& x, const EncoderLayerParams& l) {
    Tensor h = gelu(add_bias(matmul(x, l.mlp1_w), l.mlp1_b));
    return add_bias(matmul(h, l.mlp2_w), l.mlp2_b);
}

// Pre-norm encoder block: x + MSA(LN(x)), then y + MLP(LN(y)).
inline Tensor encoder_block(const Tensor& x, const EncoderLayerParams& l, const ViTConfig& cfg,
                            std::vector<Tensor>* attn_maps = nullptr) {
    Tensor y = add(x, self_attention(layernorm(x, l.ln1_gamma, l.ln1_beta, cfg.layernorm_eps), l, cfg, attn_maps));
    return add(y, mlp_block(layernorm(y, l.ln2_gamma, l.ln2_beta, cfg.layernorm_eps), l));
}

// Full forward to the single pre-sigmoid logit per sample. (B, num_classes).
inline Tensor forward_logits(const std::vector<ChannelImage>& batch, const ViTParams& params, const ViTConfig& cfg,
                             std::vector<Tensor>* attn_maps = nullptr) {
    Tensor x = patch_embed(batch, params, cfg);
    x = add_class_and_position(x, params);
    for (const auto& l : params.layers) x = encoder_block(x, l, cfg, attn_maps);
    x = layernorm(x, params.final_ln_gamma, params.final_ln_beta, cfg.layernorm_eps);
    Tensor cls = select_seq(x, 0);  // (B, D)
    return add_bias(matmul(cls, params.head_w), params.head_b);
}

// Predicted probabilities in (0,1), one per sample.
inline Tensor forward_classify(const std::vector<ChannelImage>& batch, const ViTParams& params, const ViTConfig& cfg,
                               std::vector<Tensor>* attn_maps = nullptr) {
    return sigmoid(forward_logits(batch, params, cfg, attn_maps));
}

}  // namespace vitxray
