#include "unetseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace unetseg {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_same_shape(const LabelMap& a, const LabelMap& b, const char* op) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw ShapeError(std::string(op) + ": label map shape mismatch");
    }
}

std::string format3(double v) {
    if (std::isnan(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

nlohmann::json counts_json(const ConfusionCounts& c) {
    return {{"n_fn", c.n_fn}, {"n_fp", c.n_fp}, {"n_tn", c.n_tn}, {"n_tp", c.n_tp}};
}

}  // namespace

ConfusionCounts confusion(const LabelMap& pred_mask, const LabelMap& gt_mask) {
    check_same_shape(pred_mask, gt_mask, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred_mask.data.size(); ++i) {
        const std::int32_t p = pred_mask.data[i];
        const std::int32_t g = gt_mask.data[i];
        if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
            throw ValidationError("confusion: masks must be binary, found " + std::to_string(p) +
                                  "/" + std::to_string(g));
        }
        if (p == 1 && g == 1) ++c.n_tp;
        else if (p == 0 && g == 0) ++c.n_tn;
        else if (p == 1 && g == 0) ++c.n_fp;
        else ++c.n_fn;
    }
    return c;
}

ConfusionCounts confusion_one_vs_rest(const LabelMap& pred, const LabelMap& gt,
                                      std::int32_t cls) {
    check_same_shape(pred, gt, "confusion_one_vs_rest");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] == cls;
        const bool g = gt.data[i] == cls;
        if (p && g) ++c.n_tp;
        else if (!p && !g) ++c.n_tn;
        else if (p && !g) ++c.n_fp;
        else ++c.n_fn;
    }
    return c;
}

double sensitivity(const ConfusionCounts& c) {
    if (c.n_p() == 0) return kNan;
    return static_cast<double>(c.n_tp) / static_cast<double>(c.n_p());
}

double specificity(const ConfusionCounts& c) {
    if (c.n_n() == 0) return kNan;
    return static_cast<double>(c.n_tn) / static_cast<double>(c.n_n());
}

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw ValidationError("accuracy: no evaluated pixels");
    return static_cast<double>(c.n_tp + c.n_tn) / static_cast<double>(c.total());
}

LabelMap argmax_channels(const Tensor4& logits) {
    const auto [n, num_classes, h, w] = logits.shape();
    LabelMap out(n, h, w);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                std::int32_t best = 0;
                double best_val = logits.at(i, 0, y, x);
                for (std::int64_t c = 1; c < num_classes; ++c) {
                    const double v = logits.at(i, c, y, x);
                    if (v > best_val) {
                        best_val = v;
                        best = static_cast<std::int32_t>(c);
                    }
                }
                out.at(i, y, x) = best;
            }
        }
    }
    return out;
}

MetricSummary summarize(const std::vector<ConfusionCounts>& class_counts, double bottleneck_ce) {
    if (class_counts.empty()) throw ValidationError("summarize: no class counts");
    MetricSummary s;
    s.class_counts = class_counts;
    s.bottleneck_ce = bottleneck_ce;

    double sens_sum = 0.0, spec_sum = 0.0, acc_sum = 0.0;
    std::int64_t sens_n = 0, spec_n = 0, acc_n = 0;
    for (const auto& c : class_counts) {
        const double sens = sensitivity(c);
        if (!std::isnan(sens)) {
            sens_sum += sens;
            ++sens_n;
        }
        const double spec = specificity(c);
        if (!std::isnan(spec)) {
            spec_sum += spec;
            ++spec_n;
        }
        if (c.total() > 0) {
            acc_sum += accuracy(c);
            ++acc_n;
        }
    }
    s.sensitivity = sens_n > 0 ? sens_sum / static_cast<double>(sens_n) : kNan;
    s.specificity = spec_n > 0 ? spec_sum / static_cast<double>(spec_n) : kNan;
    s.accuracy = acc_n > 0 ? acc_sum / static_cast<double>(acc_n) : kNan;
    return s;
}

std::string metrics_table(const MetricSummary& s, const std::string& row_label) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %-12s %-12s %-12s\n", "Data", "Specificity",
                  "Sensitivity", "Accuracy");
    std::string out = buf;
    std::snprintf(buf, sizeof(buf), "%-12s %-12s %-12s %-12s\n", row_label.c_str(),
                  format3(s.specificity).c_str(), format3(s.sensitivity).c_str(),
                  format3(s.accuracy).c_str());
    out += buf;
    std::snprintf(buf, sizeof(buf), "Bottleneck CE: %.6f\n", s.bottleneck_ce);
    out += buf;
    return out;
}

std::string metrics_json(const MetricSummary& s,
                         const std::vector<std::vector<ConfusionCounts>>& per_sample) {
    nlohmann::json j;
    j["accuracy"] = s.accuracy;
    j["bottleneck_ce"] = s.bottleneck_ce;
    j["sensitivity"] = s.sensitivity;
    j["specificity"] = s.specificity;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : s.class_counts) classes.push_back(counts_json(c));
    j["class_counts"] = classes;
    if (!per_sample.empty()) {
        nlohmann::json samples = nlohmann::json::array();
        for (const auto& sample : per_sample) {
            nlohmann::json sc = nlohmann::json::array();
            for (const auto& c : sample) sc.push_back(counts_json(c));
            samples.push_back(sc);
        }
        j["per_sample"] = samples;
    }
    return j.dump(2);
}

}  // namespace unetseg
