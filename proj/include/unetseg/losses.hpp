#pragma once

#include "unetseg/tensor.hpp"

namespace unetseg {

struct LossResult {
    double value = 0.0;
    Tensor4 grad;  // with respect to the first argument
};

// One-hot encoding of a label map: out[i, labels(i,y,x), y, x] = 1.
Tensor4 one_hot(const LabelMap& labels, std::int64_t num_classes);

// Mean absolute error over all elements.
// grad = sign(pred - target) / count, with sign(0) = 0.
LossResult l1_loss(const Tensor4& pred, const Tensor4& target);

// Per pixel: softmax over the channel axis (max-subtracted), then negative
// log-likelihood of the true class; mean over all n*h*w pixels.
// grad = (softmax - onehot) / pixel_count.
LossResult pixelwise_cross_entropy(const Tensor4& logits, const LabelMap& labels);

}  // namespace unetseg
