#pragma once

#include <string>
#include <vector>

#include "unetseg/tensor.hpp"

namespace unetseg {

// Pixel counts behind the three evaluation ratios. n_p and n_n are the
// positive / negative ground-truth totals.
struct ConfusionCounts {
    std::int64_t n_tp = 0;
    std::int64_t n_tn = 0;
    std::int64_t n_fp = 0;
    std::int64_t n_fn = 0;

    std::int64_t n_p() const { return n_tp + n_fn; }
    std::int64_t n_n() const { return n_tn + n_fp; }
    std::int64_t total() const { return n_tp + n_tn + n_fp + n_fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        n_tp += o.n_tp;
        n_tn += o.n_tn;
        n_fp += o.n_fp;
        n_fn += o.n_fn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

// Counts over two binary {0,1} masks of equal shape.
ConfusionCounts confusion(const LabelMap& pred_mask, const LabelMap& gt_mask);

// One-vs-rest counts for class `cls` over two label maps.
ConfusionCounts confusion_one_vs_rest(const LabelMap& pred, const LabelMap& gt, std::int32_t cls);

// True-positive rate n_tp / n_p. NaN when there are no positive pixels;
// callers must report that case distinctly, never as 0.
double sensitivity(const ConfusionCounts& c);

// True-negative rate n_tn / n_n. NaN when there are no negative pixels.
double specificity(const ConfusionCounts& c);

// (n_tp + n_tn) / total. Throws ValidationError on an empty count.
double accuracy(const ConfusionCounts& c);

// Per-pixel argmax over the channel axis; ties go to the lowest class index.
LabelMap argmax_channels(const Tensor4& logits);

// Aggregate metric values of an evaluation run. For more than one positive
// class the three ratios are macro-averages over the per-class counts.
struct MetricSummary {
    std::vector<ConfusionCounts> class_counts;  // one entry per positive class
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
    double bottleneck_ce = 0.0;
};

// Macro-averaged summary; `class_counts` must be non-empty. Classes whose
// ratio is undefined (no positives / no negatives) are skipped in the
// average; an average over zero defined classes is NaN.
MetricSummary summarize(const std::vector<ConfusionCounts>& class_counts, double bottleneck_ce);

// Plain-text table with the Specificity / Sensitivity / Accuracy columns,
// plus the bottleneck cross-entropy diagnostic.
std::string metrics_table(const MetricSummary& s, const std::string& row_label);

// Deterministic key-sorted JSON rendering of the summary.
std::string metrics_json(const MetricSummary& s,
                         const std::vector<std::vector<ConfusionCounts>>& per_sample = {});

}  // namespace unetseg
