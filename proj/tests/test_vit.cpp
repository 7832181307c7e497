#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "vitxray/vit.hpp"
#include "helpers.hpp"

using namespace vitxray;
using testutil::random_tensor;

namespace {

ViTConfig tiny_config() {
    ViTConfig cfg;
    cfg.image_size = 32;
    cfg.patch_size = 16;
    cfg.hidden_dim = 8;
    cfg.mlp_dim = 16;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    return cfg;
}

ChannelImage random_channel_image(std::size_t size, Rng& rng) {
    ChannelImage img;
    img.width = img.height = size;
    img.data.resize(size * size * 3);
    for (std::size_t i = 0; i < size * size; ++i) {
        double v = rng.uniform01();
        img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = v;
    }
    return img;
}

void zero_all(ViTParams& p) {
    for (auto& t : p.all()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
    for (auto& l : p.layers) {
        std::fill(l.ln1_gamma.mutable_data().begin(), l.ln1_gamma.mutable_data().end(), 1.0);
        std::fill(l.ln2_gamma.mutable_data().begin(), l.ln2_gamma.mutable_data().end(), 1.0);
    }
    std::fill(p.final_ln_gamma.mutable_data().begin(), p.final_ln_gamma.mutable_data().end(), 1.0);
}

}  // namespace

TEST_CASE("sequence length invariant") {
    ViTConfig b32;  // defaults are ViT-B/32
    CHECK(b32.num_patches() == 49);
    CHECK(b32.seq_len() == 50);

    ViTConfig one;
    one.image_size = 32;
    one.patch_size = 32;
    one.hidden_dim = 8;
    one.mlp_dim = 8;
    one.num_heads = 2;
    one.num_layers = 1;
    CHECK(one.num_patches() == 1);
    CHECK(one.seq_len() == 2);

    for (std::size_t img : {64, 128, 224}) {
        for (std::size_t patch : {8, 16, 32}) {
            if (img % patch) continue;
            ViTConfig c = tiny_config();
            c.image_size = img;
            c.patch_size = patch;
            CHECK(c.seq_len() == (img / patch) * (img / patch) + 1);
        }
    }
}

TEST_CASE("config validation") {
    ViTConfig c = tiny_config();
    c.patch_size = 15;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config();
    c.num_heads = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("patch_embed with uniform averaging weights yields patch means") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 1);
    double inv = 1.0 / static_cast<double>(cfg.patch_dim());
    std::fill(p.patch_w.mutable_data().begin(), p.patch_w.mutable_data().end(), inv);
    std::fill(p.patch_b.mutable_data().begin(), p.patch_b.mutable_data().end(), 0.0);

    Rng rng(5);
    ChannelImage img = random_channel_image(cfg.image_size, rng);
    Tensor emb = patch_embed({img}, p, cfg);
    CHECK(emb.shape() == Shape{1, 4, cfg.hidden_dim});

    std::size_t P = cfg.patch_size, side = cfg.patches_per_side();
    for (std::size_t py = 0; py < side; ++py)
        for (std::size_t px = 0; px < side; ++px) {
            double mean = 0.0;
            for (std::size_t y = 0; y < P; ++y)
                for (std::size_t x = 0; x < P; ++x)
                    for (std::size_t c = 0; c < 3; ++c) mean += img.at(px * P + x, py * P + y, c);
            mean *= inv;
            for (std::size_t j = 0; j < cfg.hidden_dim; ++j)
                CHECK(emb.data()[(py * side + px) * cfg.hidden_dim + j] == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("patch_embed rejects extent mismatch") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 1);
    Rng rng(5);
    ChannelImage img = random_channel_image(16, rng);
    CHECK_THROWS_AS(patch_embed({img}, p, cfg), std::invalid_argument);
}

TEST_CASE("add_class_and_position prepends the class token") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 2);
    Rng rng(6);
    Tensor x = random_tensor({2, 4, cfg.hidden_dim}, rng, -1.0, 1.0, false);
    Tensor y = add_class_and_position(x, p);
    CHECK(y.shape() == Shape{2, 5, cfg.hidden_dim});

    // zero position embeddings: rows 1..N equal input rows
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t j = 0; j < cfg.hidden_dim; ++j)
                CHECK(y.data()[(b * 5 + n + 1) * cfg.hidden_dim + j] == x.data()[(b * 4 + n) * cfg.hidden_dim + j]);

    // both samples share the same position embeddings
    for (auto& v : p.pos_emb.mutable_data()) v = rng.uniform(-1.0, 1.0);
    Tensor y2 = add_class_and_position(x, p);
    for (std::size_t n = 0; n < 5; ++n)
        for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
            double d0 = y2.data()[(0 * 5 + n) * cfg.hidden_dim + j] - y.data()[(0 * 5 + n) * cfg.hidden_dim + j];
            double d1 = y2.data()[(1 * 5 + n) * cfg.hidden_dim + j] - y.data()[(1 * 5 + n) * cfg.hidden_dim + j];
            CHECK(d0 == d1);
        }
}

TEST_CASE("zeroed blocks make the encoder the identity map") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 3);
    zero_all(p);
    Rng rng(7);
    Tensor x = random_tensor({2, 5, cfg.hidden_dim}, rng, -1.0, 1.0, false);
    Tensor y = encoder_block(x, p.layers[0], cfg);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("single-token attention is the value projection") {
    ViTConfig cfg = tiny_config();
    cfg.num_heads = 1;
    ViTParams p = init_params(cfg, 4);
    auto& l = p.layers[0];
    // identity output projection isolates the value path
    std::fill(l.out_w.mutable_data().begin(), l.out_w.mutable_data().end(), 0.0);
    for (std::size_t i = 0; i < cfg.hidden_dim; ++i)
        l.out_w.mutable_data()[i * cfg.hidden_dim + i] = 1.0;
    std::fill(l.out_b.mutable_data().begin(), l.out_b.mutable_data().end(), 0.0);

    Rng rng(8);
    Tensor x = random_tensor({1, 1, cfg.hidden_dim}, rng, -1.0, 1.0, false);
    Tensor attn = self_attention(x, l, cfg);

    // expected: v = x * Wv + bv (last third of the qkv projection)
    std::size_t D = cfg.hidden_dim;
    for (std::size_t j = 0; j < D; ++j) {
        double v = l.qkv_b.data()[2 * D + j];
        for (std::size_t i = 0; i < D; ++i) v += x.data()[i] * l.qkv_w.data()[i * 3 * D + 2 * D + j];
        CHECK(attn.data()[j] == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("two-token single-head attention matches a hand-worked oracle") {
    ViTConfig cfg;
    cfg.image_size = 32;
    cfg.patch_size = 32;
    cfg.hidden_dim = 2;
    cfg.mlp_dim = 4;
    cfg.num_heads = 1;
    cfg.num_layers = 1;
    ViTParams p = init_params(cfg, 5);
    auto& l = p.layers[0];
    // hand-set projections
    std::vector<double> qkv = {
        // row 0: q0 q1 | k0 k1 | v0 v1
        1.0, 0.0, 0.5, 0.0, 1.0, 2.0,
        0.0, 1.0, 0.0, 0.5, -1.0, 0.5,
    };
    l.qkv_w.mutable_data() = qkv;
    std::fill(l.qkv_b.mutable_data().begin(), l.qkv_b.mutable_data().end(), 0.0);
    l.out_w.mutable_data() = {1.0, 0.0, 0.0, 1.0};
    std::fill(l.out_b.mutable_data().begin(), l.out_b.mutable_data().end(), 0.0);

    Tensor x = Tensor::from_data({1, 2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor got = self_attention(x, l, cfg);

    // oracle: q = x Wq, k = x Wk, v = x Wv; A = softmax(q k^T / sqrt(2)); out = A v
    double q[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    double k[2][2] = {{0.5, 0.0}, {0.0, 0.5}};
    double v[2][2] = {{1.0, 2.0}, {-1.0, 0.5}};
    double scale = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < 2; ++i) {
        double s0 = (q[i][0] * k[0][0] + q[i][1] * k[0][1]) * scale;
        double s1 = (q[i][0] * k[1][0] + q[i][1] * k[1][1]) * scale;
        double m = std::max(s0, s1);
        double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
        double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
        for (int j = 0; j < 2; ++j) {
            double expect = a0 * v[0][j] + a1 * v[1][j];
            CHECK(std::abs(got.data()[i * 2 + j] - expect) < 1e-10);
        }
    }
}

TEST_CASE("attention weights per query sum to 1") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 6);
    Rng rng(9);
    ChannelImage img = random_channel_image(cfg.image_size, rng);
    std::vector<Tensor> maps;
    forward_classify({img, img}, p, cfg, &maps);
    REQUIRE(maps.size() == cfg.num_layers * cfg.num_heads);
    for (const auto& m : maps) {
        std::size_t S = m.shape()[1];
        REQUIRE(m.shape() == Shape{2, S, S});
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t qi = 0; qi < S; ++qi) {
                double sum = 0.0;
                for (std::size_t ki = 0; ki < S; ++ki) {
                    double w = m.data()[(b * S + qi) * S + ki];
                    CHECK(w >= 0.0);
                    CHECK(w <= 1.0);
                    sum += w;
                }
                CHECK(std::abs(sum - 1.0) < 1e-12);
            }
    }
}

TEST_CASE("zero head makes every probability 0.5; output strictly in (0,1)") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 10);
    std::fill(p.head_w.mutable_data().begin(), p.head_w.mutable_data().end(), 0.0);
    std::fill(p.head_b.mutable_data().begin(), p.head_b.mutable_data().end(), 0.0);
    Rng rng(11);
    ChannelImage a = random_channel_image(cfg.image_size, rng);
    ChannelImage b = random_channel_image(cfg.image_size, rng);
    Tensor probs = forward_classify({a, b}, p, cfg);
    CHECK(probs.data()[0] == 0.5);
    CHECK(probs.data()[1] == 0.5);

    ViTParams q = init_params(cfg, 12);
    Tensor probs2 = forward_classify({a, b}, q, cfg);
    Tensor logits = forward_logits({a, b}, q, cfg);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(probs2.data()[i] > 0.0);
        CHECK(probs2.data()[i] < 1.0);
        CHECK(((probs2.data()[i] >= 0.5) == (logits.data()[i] >= 0.0)));
    }
}

TEST_CASE("param_count equals independent shape-table enumeration") {
    auto enumerate = [](const ViTConfig& c) {
        std::size_t S = (c.image_size / c.patch_size) * (c.image_size / c.patch_size) + 1;
        std::vector<std::size_t> sizes = {
            c.patch_size * c.patch_size * c.in_channels * c.hidden_dim,  // patch W
            c.hidden_dim,                                                // patch b
            c.hidden_dim,                                                // class token
            S * c.hidden_dim,                                            // pos emb
            2 * c.hidden_dim,                                            // final ln
            c.hidden_dim * c.num_classes + c.num_classes,                // head
        };
        std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        for (std::size_t l = 0; l < c.num_layers; ++l)
            total += 2 * c.hidden_dim + (c.hidden_dim * 3 * c.hidden_dim + 3 * c.hidden_dim) +
                     (c.hidden_dim * c.hidden_dim + c.hidden_dim) + 2 * c.hidden_dim +
                     (c.hidden_dim * c.mlp_dim + c.mlp_dim) + (c.mlp_dim * c.hidden_dim + c.hidden_dim);
        return total;
    };

    ViTConfig tiny;
    tiny.image_size = 32;
    tiny.patch_size = 16;
    tiny.hidden_dim = 8;
    tiny.mlp_dim = 16;
    tiny.num_heads = 2;
    tiny.num_layers = 1;
    CHECK(param_count(tiny) == enumerate(tiny));

    ViTConfig b32;  // defaults: hidden 768, mlp 3072, heads 12, layers 12
    CHECK(param_count(b32) == enumerate(b32));

    // adding layers adds exactly the per-layer count each
    ViTConfig twice = tiny;
    twice.num_layers = 2;
    ViTConfig thrice = tiny;
    thrice.num_layers = 3;
    std::size_t per_layer = param_count(twice) - param_count(tiny);
    CHECK(param_count(thrice) - param_count(twice) == per_layer);
    CHECK(per_layer == enumerate(twice) - enumerate(tiny));

    // init_params allocates exactly param_count values
    ViTParams p = init_params(tiny, 1);
    std::size_t total = 0;
    for (const auto& [name, t] : p.named()) total += t.numel();
    CHECK(total == param_count(tiny));
}

TEST_CASE("permuting patches together with position embeddings leaves output unchanged") {
    ViTConfig cfg = tiny_config();
    ViTParams p = init_params(cfg, 20);
    Rng rng(21);
    for (auto& v : p.pos_emb.mutable_data()) v = rng.uniform(-0.5, 0.5);
    ChannelImage img = random_channel_image(cfg.image_size, rng);
    Tensor base = forward_classify({img}, p, cfg);

    // permute the four patches of the image and the matching pos-emb rows
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::size_t P = cfg.patch_size, side = cfg.patches_per_side();
    ChannelImage permuted = img;
    for (std::size_t n = 0; n < perm.size(); ++n) {
        std::size_t src = perm[n];
        std::size_t sx = (src % side) * P, sy = (src / side) * P;
        std::size_t dx = (n % side) * P, dy = (n / side) * P;
        for (std::size_t y = 0; y < P; ++y)
            for (std::size_t x = 0; x < P; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    permuted.data[((dy + y) * cfg.image_size + dx + x) * 3 + c] = img.at(sx + x, sy + y, c);
    }
    ViTParams p2 = init_params(cfg, 20);
    {
        auto src = p.named();
        auto dst = p2.named();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.mutable_data() = src[i].second.data();
    }
    std::size_t D = cfg.hidden_dim;
    for (std::size_t n = 0; n < perm.size(); ++n)
        for (std::size_t j = 0; j < D; ++j)
            p2.pos_emb.mutable_data()[(n + 1) * D + j] = p.pos_emb.data()[(perm[n] + 1) * D + j];

    Tensor got = forward_classify({permuted}, p2, cfg);
    CHECK(std::abs(got.data()[0] - base.data()[0]) < 1e-12);
}

TEST_CASE("end-to-end gradient check on a tiny model") {
    ViTConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.hidden_dim = 4;
    cfg.mlp_dim = 8;
    cfg.num_heads = 2;
    cfg.num_layers = 1;
    ViTParams p = init_params(cfg, 30);
    Rng rng(31);
    ChannelImage a = random_channel_image(cfg.image_size, rng);
    ChannelImage b = random_channel_image(cfg.image_size, rng);

    auto loss_fn = [&] {
        Tensor probs = forward_classify({a, b}, p, cfg);
        Tensor target = Tensor::from_data({2, 1}, {1.0, 0.0});
        Tensor diff = add(probs, scale(target, -1.0));
        return sum(mul(diff, diff));
    };
    double err = testutil::finite_diff_worst_rel_err(p.all(), loss_fn, 1e-5, 6);
    CHECK(err < 1e-4);
}
