#include "unetseg/losses.hpp"

#include <cmath>

namespace unetseg {

Tensor4 one_hot(const LabelMap& labels, std::int64_t num_classes) {
    Tensor4 out({labels.n, num_classes, labels.h, labels.w});
    for (std::int64_t i = 0; i < labels.n; ++i) {
        for (std::int64_t y = 0; y < labels.h; ++y) {
            for (std::int64_t x = 0; x < labels.w; ++x) {
                const std::int32_t cls = labels.at(i, y, x);
                if (cls < 0 || cls >= num_classes) {
                    throw ValidationError("one_hot: label " + std::to_string(cls) +
                                          " outside [0, " + std::to_string(num_classes) + ")");
                }
                out.at(i, cls, y, x) = 1.0;
            }
        }
    }
    return out;
}

LossResult l1_loss(const Tensor4& pred, const Tensor4& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("l1_loss: shape mismatch " + pred.shape().str() + " vs " +
                         target.shape().str());
    }
    const std::int64_t count = pred.size();
    const double inv = 1.0 / static_cast<double>(count);
    LossResult res;
    res.grad = Tensor4(pred.shape());
    double sum = 0.0;
    for (std::int64_t i = 0; i < count; ++i) {
        const double d = pred[i] - target[i];
        sum += std::abs(d);
        res.grad[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    res.value = sum * inv;
    return res;
}

LossResult pixelwise_cross_entropy(const Tensor4& logits, const LabelMap& labels) {
    const auto [n, num_classes, h, w] = logits.shape();
    if (labels.n != n || labels.h != h || labels.w != w) {
        throw ShapeError("pixelwise_cross_entropy: logits " + logits.shape().str() +
                         " vs labels (" + std::to_string(labels.n) + ", " +
                         std::to_string(labels.h) + ", " + std::to_string(labels.w) + ")");
    }
    const std::int64_t pixels = n * h * w;
    const double inv = 1.0 / static_cast<double>(pixels);

    LossResult res;
    res.grad = Tensor4(logits.shape());
    double sum = 0.0;
    std::vector<double> probs(static_cast<std::size_t>(num_classes));
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                const std::int32_t cls = labels.at(i, y, x);
                if (cls < 0 || cls >= num_classes) {
                    throw ValidationError("pixelwise_cross_entropy: label " +
                                          std::to_string(cls) + " outside [0, " +
                                          std::to_string(num_classes) + ")");
                }
                double max_logit = logits.at(i, 0, y, x);
                for (std::int64_t c = 1; c < num_classes; ++c) {
                    max_logit = std::max(max_logit, logits.at(i, c, y, x));
                }
                double z = 0.0;
                for (std::int64_t c = 0; c < num_classes; ++c) {
                    probs[static_cast<std::size_t>(c)] =
                        std::exp(logits.at(i, c, y, x) - max_logit);
                    z += probs[static_cast<std::size_t>(c)];
                }
                sum += std::log(z) - (logits.at(i, cls, y, x) - max_logit);
                for (std::int64_t c = 0; c < num_classes; ++c) {
                    const double p = probs[static_cast<std::size_t>(c)] / z;
                    res.grad.at(i, c, y, x) = (p - (c == cls ? 1.0 : 0.0)) * inv;
                }
            }
        }
    }
    res.value = sum * inv;
    return res;
}

}  // namespace unetseg
