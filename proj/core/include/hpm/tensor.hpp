#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <vector>

#include "hpm/rng.hpp"

namespace hpm {

/// Extents, outermost first. Rank 1 to 4; the rank-4 convention is
/// (batch, channel, height, width).
using Shape = std::vector<int>;

/// Dense row-major float32 array. Immutable shape; all extents >= 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> data);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::size_t size() const { return data_.size(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& at(int i) { return data_[offset({{i, 0, 0, 0}}, 1)]; }
    float at(int i) const { return data_[offset({{i, 0, 0, 0}}, 1)]; }
    float& at(int i, int j) { return data_[offset({{i, j, 0, 0}}, 2)]; }
    float at(int i, int j) const { return data_[offset({{i, j, 0, 0}}, 2)]; }
    float& at(int i, int j, int k) { return data_[offset({{i, j, k, 0}}, 3)]; }
    float at(int i, int j, int k) const { return data_[offset({{i, j, k, 0}}, 3)]; }
    float& at(int n, int c, int h, int w) { return data_[offset({{n, c, h, w}}, 4)]; }
    float at(int n, int c, int h, int w) const { return data_[offset({{n, c, h, w}}, 4)]; }

    /// Flat row-major index of a rank-4 coordinate.
    std::size_t index_of(int n, int c, int h, int w) const;
    /// Inverse of index_of.
    std::array<int, 4> coords_of(std::size_t flat) const;

    /// Same data, new shape with an equal element count.
    Tensor reshaped(Shape shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::size_t offset(const std::array<int, 4>& idx, int rank) const;

    Shape shape_;
    std::vector<float> data_;
};

/// All-zero tensor. Rejects empty shapes and zero extents.
Tensor zeros(const Shape& shape);

/// Elementwise sum; shapes must match exactly (no broadcasting).
Tensor elementwise_add(const Tensor& a, const Tensor& b);

/// Rank-2 matrix product (MxK)·(KxN) -> MxN.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Tensor of i.i.d. uniforms in [lo, hi) drawn from rng.
Tensor uniform(Rng& rng, const Shape& shape, float lo, float hi);

}  // namespace hpm
