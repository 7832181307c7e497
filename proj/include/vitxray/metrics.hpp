#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vitxray {

// Positive class is COVID throughout.
struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

struct ClassMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool precision_defined = true, recall_defined = true, f1_defined = true;
};

struct MetricsReport {
    ConfusionCounts counts;
    double accuracy = 0.0;
    ClassMetrics positive;   // COVID
    ClassMetrics negative;   // NON-COVID (positive class swapped)
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
};

namespace detail {

inline ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
    // Undefined ratios (zero denominator) are reported as 0 with the flag
    // cleared, so batch evaluation stays total.
    ClassMetrics m;
    if (tp + fp == 0) {
        m.precision_defined = false;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
        m.recall_defined = false;
    } else {
        m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1_defined = false;
        m.f1 = 0.0;
    }
    return m;
}

}  // namespace detail

inline double f1_score(double precision, double recall) {
    return 2.0 * precision * recall / (precision + recall);
}

inline MetricsReport compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("compute_metrics: zero total count");
    MetricsReport r;
    r.counts = c;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    r.positive = detail::class_metrics(c.tp, c.fp, c.fn);
    r.negative = detail::class_metrics(c.tn, c.fn, c.fp);  // swapped positive class
    r.macro_precision = (r.positive.precision + r.negative.precision) / 2.0;
    r.macro_recall = (r.positive.recall + r.negative.recall) / 2.0;
    r.macro_f1 = (r.positive.f1 + r.negative.f1) / 2.0;
    double support_pos = static_cast<double>(c.tp + c.fn);
    double support_neg = static_cast<double>(c.tn + c.fp);
    double total = support_pos + support_neg;
    r.weighted_precision = (support_pos * r.positive.precision + support_neg * r.negative.precision) / total;
    r.weighted_recall = (support_pos * r.positive.recall + support_neg * r.negative.recall) / total;
    r.weighted_f1 = (support_pos * r.positive.f1 + support_neg * r.negative.f1) / total;
    return r;
}

inline std::string format_metrics_text(const MetricsReport& r) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "tp: " << r.counts.tp << "\n"
       << "fp: " << r.counts.fp << "\n"
       << "fn: " << r.counts.fn << "\n"
       << "tn: " << r.counts.tn << "\n"
       << "accuracy: " << r.accuracy << "\n"
       << "precision: " << r.positive.precision << (r.positive.precision_defined ? "" : " (undefined)") << "\n"
       << "recall: " << r.positive.recall << (r.positive.recall_defined ? "" : " (undefined)") << "\n"
       << "f1: " << r.positive.f1 << (r.positive.f1_defined ? "" : " (undefined)") << "\n"
       << "negative_precision: " << r.negative.precision << "\n"
       << "negative_recall: " << r.negative.recall << "\n"
       << "negative_f1: " << r.negative.f1 << "\n"
       << "macro_precision: " << r.macro_precision << "\n"
       << "macro_recall: " << r.macro_recall << "\n"
       << "macro_f1: " << r.macro_f1 << "\n"
       << "weighted_precision: " << r.weighted_precision << "\n"
       << "weighted_recall: " << r.weighted_recall << "\n"
       << "weighted_f1: " << r.weighted_f1 << "\n";
    return os.str();
}

}  // namespace vitxray
