#pragma once

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

#include "unetseg/errors.hpp"

namespace unetseg {

// Shape of a rank-4 tensor in (batch, channel, height, width) order.
// All dimensions are strictly positive for a valid shape.
struct Shape4 {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t elems() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

// Throws ShapeError on non-positive dimensions or element-count overflow.
void validate_shape(const Shape4& s);

// Dense rank-4 array of doubles, row-major in (n, c, h, w) order.
// Flat offset of (i, j, y, x) is ((i*c + j)*h + y)*w + x.
class Tensor4 {
  public:
    Tensor4() = default;
    explicit Tensor4(const Shape4& shape, double fill = 0.0) : shape_(shape) {
        validate_shape(shape);
        data_.assign(static_cast<std::size_t>(shape.elems()), fill);
    }

    const Shape4& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::int64_t offset(std::int64_t i, std::int64_t j, std::int64_t y, std::int64_t x) const {
        assert(i >= 0 && i < shape_.n && j >= 0 && j < shape_.c);
        assert(y >= 0 && y < shape_.h && x >= 0 && x < shape_.w);
        return ((i * shape_.c + j) * shape_.h + y) * shape_.w + x;
    }

    double& at(std::int64_t i, std::int64_t j, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(offset(i, j, y, x))];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(offset(i, j, y, x))];
    }

    double& operator[](std::int64_t flat) { return data_[static_cast<std::size_t>(flat)]; }
    double operator[](std::int64_t flat) const { return data_[static_cast<std::size_t>(flat)]; }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    // Same data, new shape with identical element count.
    Tensor4 reshaped(const Shape4& shape) const;

    bool operator==(const Tensor4&) const = default;

  private:
    Shape4 shape_{};
    std::vector<double> data_;
};

// Integer class-label map, one label per pixel, row-major (n, h, w).
struct LabelMap {
    std::int64_t n = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::vector<std::int32_t> data;

    LabelMap() = default;
    LabelMap(std::int64_t n_, std::int64_t h_, std::int64_t w_, std::int32_t fill = 0);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t offset(std::int64_t i, std::int64_t y, std::int64_t x) const {
        assert(i >= 0 && i < n && y >= 0 && y < h && x >= 0 && x < w);
        return (i * h + y) * w + x;
    }
    std::int32_t& at(std::int64_t i, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>(offset(i, y, x))];
    }
    std::int32_t at(std::int64_t i, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>(offset(i, y, x))];
    }

    bool operator==(const LabelMap&) const = default;
};

Tensor4 create(const Shape4& shape, double fill);

enum class Elementwise { add, sub, mul };

// result[i] = op(a[i], b[i]); shapes must match exactly.
Tensor4 elementwise(const Tensor4& a, const Tensor4& b, Elementwise op);

// Sum of all elements in flat row-major order (fixed order for determinism).
double reduce_sum(const Tensor4& a);

}  // namespace unetseg
