#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "unetseg/tensor.hpp"

namespace unetseg {

// Convolution parameters: kernels shaped (out_channels, in_channels, kh, kw),
// bias shaped (1, 1, 1, out_channels).
struct ConvWeights {
    Tensor4 kernels;
    Tensor4 bias;
};

// Fully connected parameters: matrix shaped (1, 1, out_dim, in_dim),
// bias shaped (1, 1, 1, out_dim).
struct FcWeights {
    Tensor4 matrix;
    Tensor4 bias;
};

// For each pooled cell, the flat offset into the input tensor of the
// element that won its 2x2 window (ties broken toward the lowest offset).
struct PoolRecord {
    Shape4 input_shape{};
    std::vector<std::int64_t> argmax;
};

struct ConvGrads {
    Tensor4 dx;
    Tensor4 dkernels;
    Tensor4 dbias;
};

struct FcGrads {
    Tensor4 dx;
    Tensor4 dmatrix;
    Tensor4 dbias;
};

// Zero-padded "same" convolution. Output shape (n, out_channels, h, w);
// out[i,o,y,x] = bias[o] + sum over (j, dy, dx) of
//   x[i, j, y+dy-floor(kh/2), x+dx-floor(kw/2)] * kernels[o, j, dy, dx],
// with out-of-bounds reads as 0 and the summation in (j, dy, dx) order.
Tensor4 conv2d(const Tensor4& x, const Tensor4& kernels, const Tensor4& bias);
inline Tensor4 conv2d(const Tensor4& x, const ConvWeights& w) {
    return conv2d(x, w.kernels, w.bias);
}
ConvGrads conv2d_vjp(const Tensor4& x, const Tensor4& kernels, const Tensor4& upstream);

Tensor4 relu(const Tensor4& x);
// Upstream routed where the pre-activation is > 0; the subgradient at
// exactly 0 is 0.
Tensor4 relu_vjp(const Tensor4& pre_activation, const Tensor4& upstream);

// Disjoint 2x2 windows with stride 2; h and w must be even.
std::pair<Tensor4, PoolRecord> maxpool2(const Tensor4& x);
// Routes upstream values to the recorded argmax positions only.
Tensor4 maxpool2_vjp(const PoolRecord& record, const Tensor4& upstream);

// Transposed convolution with stride 2 and 2x2 kernels: every input element
// scatters x[i,j,y,x] * kernels[o,j,dy,dx] into out[i,o,2y+dy,2x+dx]; bias is
// added once per output element. Output shape (n, out_channels, 2h, 2w).
Tensor4 upconv2(const Tensor4& x, const Tensor4& kernels, const Tensor4& bias);
inline Tensor4 upconv2(const Tensor4& x, const ConvWeights& w) {
    return upconv2(x, w.kernels, w.bias);
}
ConvGrads upconv2_vjp(const Tensor4& x, const Tensor4& kernels, const Tensor4& upstream);

// Channel concatenation with a's channels first; n, h, w must agree.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
// Splits the upstream back into the two operands' channel ranges.
std::pair<Tensor4, Tensor4> concat_channels_vjp(std::int64_t a_channels, const Tensor4& upstream);
// Channels [from, to) of x, shape otherwise unchanged.
Tensor4 slice_channels(const Tensor4& x, std::int64_t from, std::int64_t to);

// Per batch item: out = matrix * x + bias. x shaped (n, 1, 1, in_dim).
Tensor4 fc(const Tensor4& x, const Tensor4& matrix, const Tensor4& bias);
inline Tensor4 fc(const Tensor4& x, const FcWeights& w) { return fc(x, w.matrix, w.bias); }
FcGrads fc_vjp(const Tensor4& x, const Tensor4& matrix, const Tensor4& upstream);

Tensor4 sigmoid(const Tensor4& x);
// Takes the forward *output* s; dx = upstream * s * (1 - s).
Tensor4 sigmoid_vjp(const Tensor4& output, const Tensor4& upstream);

}  // namespace unetseg
