#include "unetseg/tensor.hpp"

#include <limits>

namespace unetseg {

std::string Shape4::str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + ")";
}

void validate_shape(const Shape4& s) {
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
        throw ShapeError("invalid shape " + s.str() + ": all dimensions must be >= 1");
    }
    // Checked product so n*c*h*w cannot silently wrap.
    const std::int64_t limit = std::numeric_limits<std::int64_t>::max();
    std::int64_t total = 1;
    for (std::int64_t d : {s.n, s.c, s.h, s.w}) {
        if (total > limit / d) {
            throw ShapeError("invalid shape " + s.str() + ": element count overflows index type");
        }
        total *= d;
    }
}

Tensor4 Tensor4::reshaped(const Shape4& shape) const {
    validate_shape(shape);
    if (shape.elems() != size()) {
        throw ShapeError("reshape " + shape_.str() + " -> " + shape.str() +
                         ": element count mismatch");
    }
    Tensor4 out(shape);
    out.data_ = data_;
    return out;
}

LabelMap::LabelMap(std::int64_t n_, std::int64_t h_, std::int64_t w_, std::int32_t fill)
    : n(n_), h(h_), w(w_) {
    if (n <= 0 || h <= 0 || w <= 0) {
        throw ShapeError("invalid label map shape (" + std::to_string(n) + ", " +
                         std::to_string(h) + ", " + std::to_string(w) + ")");
    }
    data.assign(static_cast<std::size_t>(n * h * w), fill);
}

Tensor4 create(const Shape4& shape, double fill) { return Tensor4(shape, fill); }

Tensor4 elementwise(const Tensor4& a, const Tensor4& b, Elementwise op) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise: shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
    }
    Tensor4 out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::int64_t count = a.size();
    switch (op) {
        case Elementwise::add:
            for (std::int64_t i = 0; i < count; ++i) po[i] = pa[i] + pb[i];
            break;
        case Elementwise::sub:
            for (std::int64_t i = 0; i < count; ++i) po[i] = pa[i] - pb[i];
            break;
        case Elementwise::mul:
            for (std::int64_t i = 0; i < count; ++i) po[i] = pa[i] * pb[i];
            break;
    }
    return out;
}

double reduce_sum(const Tensor4& a) {
    double sum = 0.0;
    const double* p = a.data();
    const std::int64_t count = a.size();
    for (std::int64_t i = 0; i < count; ++i) sum += p[i];
    return sum;
}

}  // namespace unetseg
