#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitxray/checkpoint.hpp"
#include "vitxray/hpo.hpp"
#include "vitxray/image_io.hpp"
#include "vitxray/manifest.hpp"
#include "vitxray/metrics.hpp"
#include "vitxray/train.hpp"
#include "vitxray/vit.hpp"

namespace vitxray::cli {

namespace detail {

inline void write_text_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("short write: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline void write_pgm_atomic(const GrayImage& img, const std::string& path) {
    auto bytes = encode_pgm(img);
    write_text_atomic(path, std::string(bytes.begin(), bytes.end()));
}

inline nlohmann::json metrics_json(const MetricsReport& r) {
    nlohmann::json j;
    j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
    j["accuracy"] = r.accuracy;
    j["precision"] = r.positive.precision;
    j["precision_defined"] = r.positive.precision_defined;
    j["recall"] = r.positive.recall;
    j["recall_defined"] = r.positive.recall_defined;
    j["f1"] = r.positive.f1;
    j["f1_defined"] = r.positive.f1_defined;
    j["negative"] = {{"precision", r.negative.precision}, {"recall", r.negative.recall}, {"f1", r.negative.f1}};
    j["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
    j["weighted"] = {{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}};
    return j;
}

inline std::string shape_table(const ViTParams& params) {
    std::ostringstream os;
    std::size_t total = 0;
    for (const auto& [name, t] : params.named()) {
        os << name << "\t" << shape_str(t.shape()) << "\t" << t.numel() << "\n";
        total += t.numel();
    }
    os << "total\t\t" << total << "\n";
    return os.str();
}

}  // namespace detail

// Returns the process exit code: 0 success, 1 runtime failure, 2 usage error.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    CLI::App app{"Vision Transformer chest X-ray binary-classification toolkit"};
    app.require_subcommand(1);

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Run the image pipeline on one image and write a PGM");
    std::string pre_input, pre_output, pre_augcfg;
    bool pre_no_clahe = false, pre_augment = false, pre_clahe_after = false;
    std::uint64_t pre_seed = 0;
    std::size_t pre_resize = 224;
    pre->add_option("--input", pre_input, "Input image (PGM P5 or 8-bit PNG)")->required();
    pre->add_option("--output", pre_output, "Output PGM path")->required();
    pre->add_option("--augment-config", pre_augcfg, "Augmentation key=value config file");
    pre->add_flag("--no-clahe", pre_no_clahe, "Skip CLAHE enhancement");
    pre->add_flag("--augment", pre_augment, "Apply the stochastic augmentation chain");
    pre->add_flag("--clahe-after-augment", pre_clahe_after, "Apply CLAHE after augmentation instead of before");
    pre->add_option("--seed", pre_seed, "RNG seed");
    pre->add_option("--resize", pre_resize, "Target square size (0 = keep size)");

    // manifest
    auto* man = app.add_subcommand("manifest", "Build a train/validation/test manifest from class directories");
    std::string man_covid, man_output;
    std::vector<std::string> man_noncovid;
    std::uint64_t man_seed = 0;
    std::vector<std::size_t> man_counts;
    std::vector<double> man_fracs;
    man->add_option("--covid-dir", man_covid, "Directory of COVID images")->required();
    man->add_option("--noncovid-dir", man_noncovid, "NON-COVID class directory (repeatable)")->required();
    man->add_option("--output", man_output, "Manifest output path")->required();
    man->add_option("--seed", man_seed, "Assignment seed");
    man->add_option("--counts", man_counts,
                    "Explicit counts: train-covid train-noncovid val-covid val-noncovid test-covid test-noncovid")
        ->expected(6);
    man->add_option("--fractions", man_fracs, "Split fractions: train val test (sum to 1)")->expected(3);

    // train
    auto* tr = app.add_subcommand("train", "Train the classifier");
    std::string tr_config, tr_manifest, tr_augcfg, tr_checkpoint, tr_log;
    std::int64_t tr_seed = -1;
    tr->add_option("--config", tr_config, "Train config (key=value)")->required();
    tr->add_option("--manifest", tr_manifest, "Dataset manifest")->required();
    tr->add_option("--augment-config", tr_augcfg, "Augmentation config for the train split");
    tr->add_option("--checkpoint", tr_checkpoint, "Best-validation checkpoint output path");
    tr->add_option("--log", tr_log, "Training log output path");
    tr->add_option("--seed", tr_seed, "Seed override (defaults to the config's seed)");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
    std::string ev_checkpoint, ev_manifest, ev_split = "test", ev_config, ev_output;
    bool ev_json = false;
    ev->add_option("--checkpoint", ev_checkpoint, "Model checkpoint")->required();
    ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
    ev->add_option("--split", ev_split, "Split to evaluate: train, validation or test");
    ev->add_option("--config", ev_config, "Train config for preprocessing/batch settings");
    ev->add_option("--output", ev_output, "Write the report here instead of stdout");
    ev->add_flag("--json", ev_json, "Emit the machine-readable JSON report");

    // hpo
    auto* hp = app.add_subcommand("hpo", "Random-search sweep over optimizer and learning rate");
    std::string hp_config, hp_manifest, hp_output;
    std::size_t hp_trials = 50, hp_budget = 3;
    std::uint64_t hp_seed = 0;
    hp->add_option("--config", hp_config, "Base train config")->required();
    hp->add_option("--manifest", hp_manifest, "Dataset manifest")->required();
    hp->add_option("--trials", hp_trials, "Number of trials");
    hp->add_option("--budget-epochs", hp_budget, "Epochs per trial");
    hp->add_option("--seed", hp_seed, "Sampling seed");
    hp->add_option("--output", hp_output, "Write the ranked trial table here instead of stdout");

    // inspect
    auto* ins = app.add_subcommand("inspect", "Print a checkpoint's shape table and parameter count");
    std::string ins_checkpoint;
    ins->add_option("--checkpoint", ins_checkpoint, "Model checkpoint")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (pre->parsed()) {
            TrainConfig cfg;
            if (!pre_augcfg.empty()) parse_augment_kv(parse_kv_file(pre_augcfg), cfg.augment, cfg.clahe_spec);
            GrayImage img = load_image(pre_input);
            if (!pre_no_clahe && !pre_clahe_after) img = clahe(img, cfg.clahe_spec);
            if (pre_augment) {
                Rng rng(pre_seed ? pre_seed : cfg.augment.rng_seed);
                img = augment(img, cfg.augment, rng);
            }
            if (!pre_no_clahe && pre_clahe_after) img = clahe(img, cfg.clahe_spec);
            if (pre_resize) img = resize_bilinear(img, pre_resize, pre_resize);
            detail::write_pgm_atomic(img, pre_output);
        } else if (man->parsed()) {
            DatasetManifest m;
            if (!man_counts.empty()) {
                SplitCounts c{man_counts[0], man_counts[1], man_counts[2], man_counts[3], man_counts[4],
                              man_counts[5]};
                m = build_manifest(man_covid, man_noncovid, c, man_seed);
            } else if (!man_fracs.empty()) {
                m = build_manifest_fractions(man_covid, man_noncovid, man_fracs[0], man_fracs[1], man_fracs[2],
                                             man_seed);
            } else {
                throw std::runtime_error("manifest: give either --counts or --fractions");
            }
            std::ostringstream os;
            save_manifest(m, os);
            detail::write_text_atomic(man_output, os.str());
        } else if (tr->parsed()) {
            TrainConfig cfg = load_train_config(tr_config);
            if (!tr_augcfg.empty()) {
                parse_augment_kv(parse_kv_file(tr_augcfg), cfg.augment, cfg.clahe_spec);
                cfg.augment_train = true;
            }
            if (tr_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr_seed);
            if (!tr_checkpoint.empty()) cfg.checkpoint_path = tr_checkpoint;
            DatasetManifest m = load_manifest(tr_manifest);
            TrainResult r = train(cfg, m);
            if (!tr_log.empty()) detail::write_text_atomic(tr_log, format_log(r.log));
            out << "best_epoch=" << r.best_epoch << " best_val_acc=" << vitxray::detail::fmt_g17(r.best_val_accuracy)
                << " epochs_run=" << r.log.size() << "\n";
        } else if (ev->parsed()) {
            auto [params, vit_cfg] = load_checkpoint(ev_checkpoint);
            TrainConfig cfg = ev_config.empty() ? TrainConfig{} : load_train_config(ev_config);
            cfg.vit = vit_cfg;
            DatasetManifest m = load_manifest(ev_manifest);
            MetricsReport r = evaluate(params, cfg, m, parse_split(ev_split));
            std::string text = ev_json ? detail::metrics_json(r).dump(2) + "\n" : format_metrics_text(r);
            if (ev_output.empty())
                out << text;
            else
                detail::write_text_atomic(ev_output, text);
        } else if (hp->parsed()) {
            TrainConfig cfg = load_train_config(hp_config);
            DatasetManifest m = load_manifest(hp_manifest);
            auto trials = sample_trials(hp_trials, hp_seed, hp_budget);
            auto records = run_search(trials, cfg, m);
            std::string table = format_trial_table(records);
            if (hp_output.empty())
                out << table;
            else
                detail::write_text_atomic(hp_output, table);
        } else if (ins->parsed()) {
            auto [params, vit_cfg] = load_checkpoint(ins_checkpoint);
            out << detail::shape_table(params);
            out << "param_count=" << param_count(vit_cfg) << "\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}

}  // namespace vitxray::cli
