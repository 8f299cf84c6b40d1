#include "hpm/tensor.hpp"

#include <stdexcept>
#include <string>

namespace hpm {
namespace {

std::size_t checked_element_count(const Shape& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw std::invalid_argument("Tensor: rank must be between 1 and 4");
    }
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 1) {
            throw std::invalid_argument("Tensor: all extents must be >= 1, got " +
                                        std::to_string(e));
        }
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(checked_element_count(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_element_count(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: data length does not match shape");
    }
}

std::size_t Tensor::offset(const std::array<int, 4>& idx, int rank) const {
    assert(rank == this->rank());
    std::size_t flat = 0;
    for (int a = 0; a < rank; ++a) {
        assert(idx[static_cast<std::size_t>(a)] >= 0 &&
               idx[static_cast<std::size_t>(a)] < shape_[static_cast<std::size_t>(a)]);
        flat = flat * static_cast<std::size_t>(shape_[static_cast<std::size_t>(a)]) +
               static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]);
    }
    return flat;
}

std::size_t Tensor::index_of(int n, int c, int h, int w) const {
    return offset({{n, c, h, w}}, 4);
}

std::array<int, 4> Tensor::coords_of(std::size_t flat) const {
    assert(rank() == 4 && flat < size());
    const auto w = static_cast<std::size_t>(shape_[3]);
    const auto h = static_cast<std::size_t>(shape_[2]);
    const auto c = static_cast<std::size_t>(shape_[1]);
    std::array<int, 4> out{};
    out[3] = static_cast<int>(flat % w);
    flat /= w;
    out[2] = static_cast<int>(flat % h);
    flat /= h;
    out[1] = static_cast<int>(flat % c);
    out[0] = static_cast<int>(flat / c);
    return out;
}

Tensor Tensor::reshaped(Shape shape) const {
    Tensor out(std::move(shape), data_);
    return out;
}

Tensor zeros(const Shape& shape) {
    return Tensor(shape);
}

Tensor elementwise_add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("elementwise_add: shape mismatch");
    }
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        po[i] = pa[i] + pb[i];
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw std::invalid_argument("matmul: operands must be rank-2");
    }
    const int m = a.extent(0);
    const int k = a.extent(1);
    const int n = b.extent(1);
    if (b.extent(0) != k) {
        throw std::invalid_argument("matmul: inner extents differ");
    }
    Tensor out(Shape{m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (int i = 0; i < m; ++i) {
        float* orow = po + static_cast<std::size_t>(i) * static_cast<std::size_t>(n);
        for (int kk = 0; kk < k; ++kk) {
            const float aik = pa[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
                                 static_cast<std::size_t>(kk)];
            const float* brow = pb + static_cast<std::size_t>(kk) * static_cast<std::size_t>(n);
            for (int j = 0; j < n; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Tensor uniform(Rng& rng, const Shape& shape, float lo, float hi) {
    if (!(lo < hi)) {
        throw std::invalid_argument("uniform: lo must be < hi");
    }
    Tensor out(shape);
    float* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        p[i] = lo + rng.next_float() * (hi - lo);
    }
    return out;
}

}  // namespace hpm
