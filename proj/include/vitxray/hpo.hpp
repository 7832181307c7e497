#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitxray/optim.hpp"
#include "vitxray/rng.hpp"
#include "vitxray/train.hpp"

namespace vitxray {

struct TrialSpec {
    std::size_t id = 0;
    OptimizerVariant optimizer = OptimizerVariant::Adam;
    double lr = 1e-4;  // log-uniform in [1e-6, 1e-3]
    std::uint64_t seed = 0;
    std::size_t budget_epochs = 3;
};

struct TrialRecord {
    TrialSpec spec;
    double best_val_accuracy = 0.0;
    std::size_t epochs_run = 0;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string failure;
};

// Random search over the study space: log-uniform lr in [1e-6, 1e-3],
// uniform optimizer choice. Deterministic per seed.
inline std::vector<TrialSpec> sample_trials(std::size_t n, std::uint64_t seed, std::size_t budget_epochs = 3) {
    if (n < 1) throw std::invalid_argument("sample_trials: n must be >= 1");
    Rng rng(seed);
    std::vector<TrialSpec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        TrialSpec t;
        t.id = i;
        t.lr = std::pow(10.0, rng.uniform(-6.0, -3.0));
        t.optimizer = rng.bernoulli(0.5) ? OptimizerVariant::Adam : OptimizerVariant::RectifiedAdam;
        t.seed = Rng::derive(seed, i);
        t.budget_epochs = budget_epochs;
        out.push_back(t);
    }
    return out;
}

// Runs each trial on its reduced budget; failures are recorded, never fatal.
// Result is sorted by best validation accuracy descending, ties by lower id.
inline std::vector<TrialRecord> run_search(const std::vector<TrialSpec>& trials, const TrainConfig& base,
                                           const DatasetManifest& manifest) {
    std::vector<TrialRecord> records;
    records.reserve(trials.size());
    for (const auto& t : trials) {
        TrialRecord rec;
        rec.spec = t;
        TrainConfig cfg = base;
        cfg.optimizer = t.optimizer;
        cfg.lr = t.lr;
        cfg.seed = t.seed;
        cfg.max_epochs = t.budget_epochs;
        cfg.checkpoint_path.clear();
        auto started = std::chrono::steady_clock::now();
        try {
            TrainResult r = train(cfg, manifest);
            rec.best_val_accuracy = r.best_val_accuracy;
            rec.epochs_run = r.log.size();
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.failure = e.what();
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        records.push_back(std::move(rec));
    }
    std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
        if (a.failed != b.failed) return !a.failed;  // failures rank last
        if (a.best_val_accuracy != b.best_val_accuracy) return a.best_val_accuracy > b.best_val_accuracy;
        return a.spec.id < b.spec.id;
    });
    return records;
}

inline std::string format_trial_table(const std::vector<TrialRecord>& records) {
    std::ostringstream os;
    os << "# trial\toptimizer\tlr\tbest_val_acc\tepochs\tstatus\n";
    for (const auto& r : records) {
        os << r.spec.id << "\t" << optimizer_name(r.spec.optimizer) << "\t" << detail::fmt_g17(r.spec.lr) << "\t"
           << detail::fmt_g17(r.best_val_accuracy) << "\t" << r.epochs_run << "\t"
           << (r.failed ? "failed:" + r.failure : "ok") << "\n";
    }
    return os.str();
}

}  // namespace vitxray
