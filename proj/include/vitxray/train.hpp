#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitxray/checkpoint.hpp"
#include "vitxray/config.hpp"
#include "vitxray/image.hpp"
#include "vitxray/image_io.hpp"
#include "vitxray/manifest.hpp"
#include "vitxray/metrics.hpp"
#include "vitxray/optim.hpp"
#include "vitxray/rng.hpp"
#include "vitxray/tensor.hpp"
#include "vitxray/vit.hpp"

namespace vitxray {

struct TrainConfig {
    ViTConfig vit;
    OptimizerVariant optimizer = OptimizerVariant::RectifiedAdam;
    double lr = 1e-4;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 50;
    double plateau_factor = 0.2;
    int plateau_patience = 3;
    double lr_floor = 1e-7;
    int early_stop_patience = 5;
    std::uint64_t seed = 0;
    std::string checkpoint_path;

    // preprocessing
    bool use_clahe = true;
    bool clahe_after_augment = false;  // default CLAHE-first
    bool augment_train = false;
    AugmentSpec augment;
    ClaheSpec clahe_spec;

    void validate() const {
        vit.validate();
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (!(lr > 0.0) && lr != 0.0) throw std::invalid_argument("train config: lr must be nonnegative");
    }
};

inline TrainConfig parse_train_config(const KvMap& kv) {
    TrainConfig c;
    c.vit.image_size = static_cast<std::size_t>(kv_int(kv, "image_size", 224));
    c.vit.patch_size = static_cast<std::size_t>(kv_int(kv, "patch_size", 32));
    c.vit.in_channels = static_cast<std::size_t>(kv_int(kv, "in_channels", 3));
    c.vit.hidden_dim = static_cast<std::size_t>(kv_int(kv, "hidden_dim", 768));
    c.vit.mlp_dim = static_cast<std::size_t>(kv_int(kv, "mlp_dim", 3072));
    c.vit.num_heads = static_cast<std::size_t>(kv_int(kv, "num_heads", 12));
    c.vit.num_layers = static_cast<std::size_t>(kv_int(kv, "num_layers", 12));
    c.vit.layernorm_eps = kv_double(kv, "layernorm_eps", 1e-6);
    c.optimizer = parse_optimizer(kv_string(kv, "optimizer", "radam"));
    c.lr = kv_double(kv, "lr", 1e-4);
    c.batch_size = static_cast<std::size_t>(kv_int(kv, "batch_size", 16));
    c.max_epochs = static_cast<std::size_t>(kv_int(kv, "max_epochs", 50));
    c.plateau_factor = kv_double(kv, "plateau_factor", 0.2);
    c.plateau_patience = static_cast<int>(kv_int(kv, "plateau_patience", 3));
    c.lr_floor = kv_double(kv, "lr_floor", 1e-7);
    c.early_stop_patience = static_cast<int>(kv_int(kv, "early_stop_patience", 5));
    c.seed = kv_u64(kv, "seed", 0);
    c.use_clahe = kv_bool(kv, "use_clahe", true);
    c.clahe_after_augment = kv_bool(kv, "clahe_after_augment", false);
    c.augment_train = kv_bool(kv, "augment_train", false);
    c.validate();
    return c;
}

inline TrainConfig load_train_config(const std::string& path) { return parse_train_config(parse_kv_file(path)); }

// ---- loss ------------------------------------------------------------------

// Batch-mean binary cross-entropy on probabilities clamped at 1e-7.
inline Tensor bce_loss(const Tensor& prob, const std::vector<double>& labels) {
    constexpr double kEps = 1e-7;
    if (prob.numel() != labels.size())
        throw std::invalid_argument("bce_loss: " + std::to_string(prob.numel()) + " probabilities vs " +
                                    std::to_string(labels.size()) + " labels");
    Tensor y = Tensor::from_data(prob.shape(), labels);
    Tensor p = clamp(prob, kEps, 1.0 - kEps);
    Tensor pos = mul(y, log_op(p));
    Tensor neg = mul(affine(y, -1.0, 1.0), log_op(affine(p, -1.0, 1.0)));
    return scale(sum(add(pos, neg)), -1.0 / static_cast<double>(labels.size()));
}

// ---- preprocessing ---------------------------------------------------------

// Manifest image to model input. Augmentation only runs when a non-null rng
// is supplied (train split).
inline ChannelImage preprocess_image(const GrayImage& raw, const TrainConfig& cfg, Rng* aug_rng) {
    GrayImage img = raw;
    if (cfg.use_clahe && !cfg.clahe_after_augment) img = clahe(img, cfg.clahe_spec);
    if (aug_rng) img = augment(img, cfg.augment, *aug_rng);
    if (cfg.use_clahe && cfg.clahe_after_augment) img = clahe(img, cfg.clahe_spec);
    img = resize_bilinear(img, cfg.vit.image_size, cfg.vit.image_size);
    return stack_channels(img);
}

inline ChannelImage load_and_preprocess(const std::string& path, const TrainConfig& cfg, Rng* aug_rng) {
    return preprocess_image(load_image(path), cfg, aug_rng);
}

// ---- training log ----------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
    std::vector<std::string> events;
};

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::string format_log(const std::vector<EpochRecord>& log) {
    std::string out;
    for (const auto& r : log) {
        out += "epoch=" + std::to_string(r.epoch);
        out += " train_loss=" + detail::fmt_g17(r.train_loss);
        out += " train_acc=" + detail::fmt_g17(r.train_accuracy);
        out += " val_acc=" + detail::fmt_g17(r.val_accuracy);
        out += " lr=" + detail::fmt_g17(r.lr);
        if (!r.events.empty()) {
            out += " events=";
            for (std::size_t i = 0; i < r.events.size(); ++i) {
                if (i) out += ";";
                out += r.events[i];
            }
        }
        out += "\n";
    }
    return out;
}

// ---- evaluation ------------------------------------------------------------

// Threshold at 0.5, COVID positive. Counting is order-invariant.
inline MetricsReport evaluate(const ViTParams& params, const TrainConfig& cfg,
                              const std::vector<ManifestEntry>& entries) {
    if (entries.empty()) throw std::invalid_argument("evaluate: empty split");
    ConfusionCounts counts;
    for (std::size_t start = 0; start < entries.size(); start += cfg.batch_size) {
        std::size_t end = std::min(entries.size(), start + cfg.batch_size);
        std::vector<ChannelImage> batch;
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back(load_and_preprocess(entries[i].path, cfg, nullptr));
            labels.push_back(entries[i].label);
        }
        Tensor probs = forward_classify(batch, params, cfg.vit);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            bool pred = probs.data()[i] >= 0.5;
            bool truth = labels[i] == 1;
            if (pred && truth) ++counts.tp;
            else if (pred && !truth) ++counts.fp;
            else if (!pred && truth) ++counts.fn;
            else ++counts.tn;
        }
    }
    return compute_metrics(counts);
}

inline MetricsReport evaluate(const ViTParams& params, const TrainConfig& cfg, const DatasetManifest& manifest,
                              Split split) {
    return evaluate(params, cfg, manifest.split_entries(split));
}

// ---- training loop ---------------------------------------------------------

struct TrainResult {
    ViTParams params;       // final
    ViTParams best_params;  // highest validation accuracy
    std::vector<EpochRecord> log;
    std::size_t best_epoch = 0;
    double best_val_accuracy = -1.0;
};

namespace detail {

inline ViTParams clone_params(const ViTParams& src, const ViTConfig& cfg) {
    ViTParams dst = init_params(cfg, 0);
    auto s = src.named();
    auto d = dst.named();
    for (std::size_t i = 0; i < s.size(); ++i) d[i].second.mutable_data() = s[i].second.data();
    return dst;
}

}  // namespace detail

// Per epoch: seeded shuffle of the train split, minibatch forward + BCE +
// backward + optimizer step, validation pass, plateau and early-stop updates,
// checkpoint on validation-accuracy improvement.
inline TrainResult train(const TrainConfig& cfg, const DatasetManifest& manifest) {
    cfg.validate();
    auto train_entries = manifest.split_entries(Split::Train);
    auto val_entries = manifest.split_entries(Split::Validation);
    if (train_entries.empty()) throw std::invalid_argument("train: manifest has no train split");
    if (val_entries.empty()) throw std::invalid_argument("train: manifest has no validation split");

    TrainResult result;
    result.params = init_params(cfg.vit, cfg.seed);
    auto opt_params = result.params.all();
    OptimState opt = OptimState::create(cfg.optimizer, cfg.lr, opt_params);
    PlateauState plateau;
    plateau.factor = cfg.plateau_factor;
    plateau.patience = cfg.plateau_patience;
    plateau.lr_floor = cfg.lr_floor;
    EarlyStopState stopper;
    stopper.patience = cfg.early_stop_patience;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(cfg.seed, epoch));
        std::vector<std::size_t> order(train_entries.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t batches = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<ChannelImage> batch;
            std::vector<double> labels;
            for (std::size_t i = start; i < end; ++i) {
                const auto& e = train_entries[order[i]];
                Rng aug_rng(Rng::derive(cfg.augment.rng_seed ^ cfg.seed, epoch * order.size() + order[i]));
                batch.push_back(load_and_preprocess(e.path, cfg, cfg.augment_train ? &aug_rng : nullptr));
                labels.push_back(static_cast<double>(e.label));
            }
            result.params.zero_grad();
            Tensor probs = forward_classify(batch, result.params, cfg.vit);
            Tensor loss = bce_loss(probs, labels);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
            backward(loss);
            optimizer_step(opt_params, opt);
            loss_sum += loss.item();
            ++batches;
            for (std::size_t i = 0; i < labels.size(); ++i)
                if ((probs.data()[i] >= 0.5) == (labels[i] >= 0.5)) ++correct;
        }

        double val_acc = evaluate(result.params, cfg, val_entries).accuracy;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_entries.size());
        rec.val_accuracy = val_acc;
        rec.lr = opt.lr;

        if (val_acc > result.best_val_accuracy) {
            result.best_val_accuracy = val_acc;
            result.best_epoch = epoch;
            result.best_params = detail::clone_params(result.params, cfg.vit);
            if (!cfg.checkpoint_path.empty()) save_checkpoint(result.best_params, cfg.vit, cfg.checkpoint_path);
            rec.events.push_back("checkpoint");
        }

        double new_lr = plateau_step(plateau, val_acc, opt.lr);
        if (new_lr != opt.lr) {
            rec.events.push_back("lr_reduced:" + detail::fmt_g17(opt.lr) + "->" + detail::fmt_g17(new_lr));
            opt.lr = new_lr;
        }
        bool stop = early_stop_step(stopper, val_acc);
        if (stop) rec.events.push_back("early_stop");
        result.log.push_back(std::move(rec));
        if (stop) break;
    }
    if (result.best_epoch == 0) result.best_params = detail::clone_params(result.params, cfg.vit);
    return result;
}

}  // namespace vitxray
