#include "unetseg/layers.hpp"

#include <algorithm>
#include <cmath>

namespace unetseg {

namespace {

void check_conv_args(const Tensor4& x, const Tensor4& kernels, const Tensor4& bias,
                     const char* op) {
    if (x.shape().c != kernels.shape().c) {
        throw ShapeError(std::string(op) + ": input has " + std::to_string(x.shape().c) +
                         " channels but kernels expect " + std::to_string(kernels.shape().c));
    }
    const Shape4 expect_bias{1, 1, 1, kernels.shape().n};
    if (bias.shape() != expect_bias) {
        throw ShapeError(std::string(op) + ": bias shape " + bias.shape().str() +
                         ", expected " + expect_bias.str());
    }
}

void check_upstream(const Shape4& got, const Shape4& want, const char* op) {
    if (got != want) {
        throw ShapeError(std::string(op) + ": upstream shape " + got.str() + ", expected " +
                         want.str());
    }
}

}  // namespace

Tensor4 conv2d(const Tensor4& x, const Tensor4& kernels, const Tensor4& bias) {
    check_conv_args(x, kernels, bias, "conv2d");
    const auto [n, cin, h, w] = x.shape();
    const std::int64_t cout = kernels.shape().n;
    const std::int64_t kh = kernels.shape().h;
    const std::int64_t kw = kernels.shape().w;
    const std::int64_t py = kh / 2;
    const std::int64_t px = kw / 2;

    Tensor4 out({n, cout, h, w});
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t o = 0; o < cout; ++o) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x0 = 0; x0 < w; ++x0) {
                    double acc = bias[o];
                    for (std::int64_t j = 0; j < cin; ++j) {
                        for (std::int64_t dy = 0; dy < kh; ++dy) {
                            const std::int64_t sy = y + dy - py;
                            if (sy < 0 || sy >= h) continue;
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const std::int64_t sx = x0 + dx - px;
                                if (sx < 0 || sx >= w) continue;
                                acc += x.at(i, j, sy, sx) * kernels.at(o, j, dy, dx);
                            }
                        }
                    }
                    out.at(i, o, y, x0) = acc;
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_vjp(const Tensor4& x, const Tensor4& kernels, const Tensor4& upstream) {
    const auto [n, cin, h, w] = x.shape();
    const std::int64_t cout = kernels.shape().n;
    const std::int64_t kh = kernels.shape().h;
    const std::int64_t kw = kernels.shape().w;
    const std::int64_t py = kh / 2;
    const std::int64_t px = kw / 2;
    if (cin != kernels.shape().c) {
        throw ShapeError("conv2d_vjp: input/kernel channel mismatch");
    }
    check_upstream(upstream.shape(), {n, cout, h, w}, "conv2d_vjp");

    ConvGrads g{Tensor4(x.shape()), Tensor4(kernels.shape()), Tensor4({1, 1, 1, cout})};
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t o = 0; o < cout; ++o) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x0 = 0; x0 < w; ++x0) {
                    const double up = upstream.at(i, o, y, x0);
                    if (up == 0.0) continue;
                    g.dbias[o] += up;
                    for (std::int64_t j = 0; j < cin; ++j) {
                        for (std::int64_t dy = 0; dy < kh; ++dy) {
                            const std::int64_t sy = y + dy - py;
                            if (sy < 0 || sy >= h) continue;
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const std::int64_t sx = x0 + dx - px;
                                if (sx < 0 || sx >= w) continue;
                                g.dx.at(i, j, sy, sx) += up * kernels.at(o, j, dy, dx);
                                g.dkernels.at(o, j, dy, dx) += up * x.at(i, j, sy, sx);
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

Tensor4 relu(const Tensor4& x) {
    Tensor4 out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

Tensor4 relu_vjp(const Tensor4& pre_activation, const Tensor4& upstream) {
    check_upstream(upstream.shape(), pre_activation.shape(), "relu_vjp");
    Tensor4 out(pre_activation.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) {
        out[i] = pre_activation[i] > 0.0 ? upstream[i] : 0.0;
    }
    return out;
}

std::pair<Tensor4, PoolRecord> maxpool2(const Tensor4& x) {
    const auto [n, c, h, w] = x.shape();
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2: spatial dimensions must be even, got " + x.shape().str());
    }
    const std::int64_t oh = h / 2;
    const std::int64_t ow = w / 2;
    Tensor4 out({n, c, oh, ow});
    PoolRecord record;
    record.input_shape = x.shape();
    record.argmax.resize(static_cast<std::size_t>(out.size()));

    std::int64_t cell = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < c; ++j) {
            for (std::int64_t y = 0; y < oh; ++y) {
                for (std::int64_t x0 = 0; x0 < ow; ++x0) {
                    // Scan the window in offset order; strict > keeps the
                    // lowest flat offset on ties.
                    std::int64_t best = x.offset(i, j, 2 * y, 2 * x0);
                    double best_val = x[best];
                    for (std::int64_t dy = 0; dy < 2; ++dy) {
                        for (std::int64_t dx = 0; dx < 2; ++dx) {
                            const std::int64_t off = x.offset(i, j, 2 * y + dy, 2 * x0 + dx);
                            if (x[off] > best_val) {
                                best_val = x[off];
                                best = off;
                            }
                        }
                    }
                    out[cell] = best_val;
                    record.argmax[static_cast<std::size_t>(cell)] = best;
                    ++cell;
                }
            }
        }
    }
    return {std::move(out), std::move(record)};
}

Tensor4 maxpool2_vjp(const PoolRecord& record, const Tensor4& upstream) {
    const Shape4 in = record.input_shape;
    check_upstream(upstream.shape(), {in.n, in.c, in.h / 2, in.w / 2}, "maxpool2_vjp");
    Tensor4 dx(in);
    for (std::int64_t cell = 0; cell < upstream.size(); ++cell) {
        dx[record.argmax[static_cast<std::size_t>(cell)]] += upstream[cell];
    }
    return dx;
}

Tensor4 upconv2(const Tensor4& x, const Tensor4& kernels, const Tensor4& bias) {
    check_conv_args(x, kernels, bias, "upconv2");
    if (kernels.shape().h != 2 || kernels.shape().w != 2) {
        throw ShapeError("upconv2: kernels must be 2x2, got " + kernels.shape().str());
    }
    const auto [n, cin, h, w] = x.shape();
    const std::int64_t cout = kernels.shape().n;

    // With stride 2 and a 2x2 kernel, each output element receives exactly
    // one scatter per input channel, from input (Y/2, X/2) with kernel tap
    // (Y&1, X&1). Written as a gather so the per-element addition order is
    // bias first, then channels in ascending order.
    Tensor4 out({n, cout, 2 * h, 2 * w});
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t o = 0; o < cout; ++o) {
            for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
                for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
                    double acc = bias[o];
                    for (std::int64_t j = 0; j < cin; ++j) {
                        acc += x.at(i, j, oy / 2, ox / 2) * kernels.at(o, j, oy % 2, ox % 2);
                    }
                    out.at(i, o, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

ConvGrads upconv2_vjp(const Tensor4& x, const Tensor4& kernels, const Tensor4& upstream) {
    const auto [n, cin, h, w] = x.shape();
    const std::int64_t cout = kernels.shape().n;
    if (cin != kernels.shape().c) {
        throw ShapeError("upconv2_vjp: input/kernel channel mismatch");
    }
    check_upstream(upstream.shape(), {n, cout, 2 * h, 2 * w}, "upconv2_vjp");

    ConvGrads g{Tensor4(x.shape()), Tensor4(kernels.shape()), Tensor4({1, 1, 1, cout})};
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t o = 0; o < cout; ++o) {
            for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
                for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
                    const double up = upstream.at(i, o, oy, ox);
                    g.dbias[o] += up;
                    if (up == 0.0) continue;
                    for (std::int64_t j = 0; j < cin; ++j) {
                        g.dx.at(i, j, oy / 2, ox / 2) += up * kernels.at(o, j, oy % 2, ox % 2);
                        g.dkernels.at(o, j, oy % 2, ox % 2) += up * x.at(i, j, oy / 2, ox / 2);
                    }
                }
            }
        }
    }
    return g;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    const auto [n, ca, h, w] = a.shape();
    if (b.shape().n != n || b.shape().h != h || b.shape().w != w) {
        throw ShapeError("concat_channels: batch/spatial mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
    const std::int64_t cb = b.shape().c;
    Tensor4 out({n, ca + cb, h, w});
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < ca; ++j) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x0 = 0; x0 < w; ++x0) {
                    out.at(i, j, y, x0) = a.at(i, j, y, x0);
                }
            }
        }
        for (std::int64_t j = 0; j < cb; ++j) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x0 = 0; x0 < w; ++x0) {
                    out.at(i, ca + j, y, x0) = b.at(i, j, y, x0);
                }
            }
        }
    }
    return out;
}

std::pair<Tensor4, Tensor4> concat_channels_vjp(std::int64_t a_channels, const Tensor4& upstream) {
    if (a_channels <= 0 || a_channels >= upstream.shape().c) {
        throw ShapeError("concat_channels_vjp: split at " + std::to_string(a_channels) +
                         " outside " + upstream.shape().str());
    }
    return {slice_channels(upstream, 0, a_channels),
            slice_channels(upstream, a_channels, upstream.shape().c)};
}

Tensor4 slice_channels(const Tensor4& x, std::int64_t from, std::int64_t to) {
    const auto [n, c, h, w] = x.shape();
    if (from < 0 || to > c || from >= to) {
        throw ShapeError("slice_channels: range [" + std::to_string(from) + ", " +
                         std::to_string(to) + ") outside " + x.shape().str());
    }
    Tensor4 out({n, to - from, h, w});
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = from; j < to; ++j) {
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x0 = 0; x0 < w; ++x0) {
                    out.at(i, j - from, y, x0) = x.at(i, j, y, x0);
                }
            }
        }
    }
    return out;
}

Tensor4 fc(const Tensor4& x, const Tensor4& matrix, const Tensor4& bias) {
    const std::int64_t out_dim = matrix.shape().h;
    const std::int64_t in_dim = matrix.shape().w;
    if (x.shape().c != 1 || x.shape().h != 1 || x.shape().w != in_dim) {
        throw ShapeError("fc: input shape " + x.shape().str() + ", expected (n, 1, 1, " +
                         std::to_string(in_dim) + ")");
    }
    if (bias.shape() != Shape4{1, 1, 1, out_dim}) {
        throw ShapeError("fc: bias shape " + bias.shape().str());
    }
    const std::int64_t n = x.shape().n;
    Tensor4 out({n, 1, 1, out_dim});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * in_dim;
        for (std::int64_t o = 0; o < out_dim; ++o) {
            const double* row = matrix.data() + o * in_dim;
            double acc = bias[o];
            for (std::int64_t k = 0; k < in_dim; ++k) acc += row[k] * xi[k];
            out.at(i, 0, 0, o) = acc;
        }
    }
    return out;
}

FcGrads fc_vjp(const Tensor4& x, const Tensor4& matrix, const Tensor4& upstream) {
    const std::int64_t out_dim = matrix.shape().h;
    const std::int64_t in_dim = matrix.shape().w;
    const std::int64_t n = x.shape().n;
    if (x.shape().w != in_dim) throw ShapeError("fc_vjp: input/matrix dimension mismatch");
    check_upstream(upstream.shape(), {n, 1, 1, out_dim}, "fc_vjp");

    FcGrads g{Tensor4(x.shape()), Tensor4(matrix.shape()), Tensor4({1, 1, 1, out_dim})};
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * in_dim;
        double* dxi = g.dx.data() + i * in_dim;
        for (std::int64_t o = 0; o < out_dim; ++o) {
            const double up = upstream.at(i, 0, 0, o);
            g.dbias[o] += up;
            if (up == 0.0) continue;
            const double* row = matrix.data() + o * in_dim;
            double* drow = g.dmatrix.data() + o * in_dim;
            for (std::int64_t k = 0; k < in_dim; ++k) {
                dxi[k] += up * row[k];
                drow[k] += up * xi[k];
            }
        }
    }
    return g;
}

Tensor4 sigmoid(const Tensor4& x) {
    Tensor4 out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return out;
}

Tensor4 sigmoid_vjp(const Tensor4& output, const Tensor4& upstream) {
    check_upstream(upstream.shape(), output.shape(), "sigmoid_vjp");
    Tensor4 dx(output.shape());
    for (std::int64_t i = 0; i < dx.size(); ++i) {
        dx[i] = upstream[i] * output[i] * (1.0 - output[i]);
    }
    return dx;
}

}  // namespace unetseg
