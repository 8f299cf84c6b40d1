#include "hpm/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hpm {
namespace {

// Patch matrix layouts around the gemm kernels:
//   im2col  -> (C_in*kh*kw, OH*OW), columns contiguous per patch row
//   im2row  -> (OH*OW, C_in*kh*kw), one contiguous row per output position
void im2col(const float* x, int c_in, int h, int w, int kh, int kw, int stride,
            int pad, int oh, int ow, float* col) {
    const int patch = kh * kw;
    for (int c = 0; c < c_in; ++c) {
        const float* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int r = 0; r < kh; ++r) {
            for (int s = 0; s < kw; ++s) {
                float* dst = col + (static_cast<std::size_t>(c) * patch + r * kw + s) *
                                       static_cast<std::size_t>(oh) * ow;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride - pad + r;
                    if (iy < 0 || iy >= h) {
                        for (int xo = 0; xo < ow; ++xo) {
                            dst[y * ow + xo] = 0.0f;
                        }
                        continue;
                    }
                    const float* src = plane + static_cast<std::size_t>(iy) * w;
                    for (int xo = 0; xo < ow; ++xo) {
                        const int ix = xo * stride - pad + s;
                        dst[y * ow + xo] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

void im2row(const float* x, int c_in, int h, int w, int kh, int kw, int stride,
            int pad, int oh, int ow, float* rows) {
    const int patch = c_in * kh * kw;
    for (int y = 0; y < oh; ++y) {
        for (int xo = 0; xo < ow; ++xo) {
            float* dst = rows + (static_cast<std::size_t>(y) * ow + xo) *
                                    static_cast<std::size_t>(patch);
            int k = 0;
            for (int c = 0; c < c_in; ++c) {
                const float* plane = x + static_cast<std::size_t>(c) * h * w;
                for (int r = 0; r < kh; ++r) {
                    const int iy = y * stride - pad + r;
                    for (int s = 0; s < kw; ++s, ++k) {
                        const int ix = xo * stride - pad + s;
                        dst[k] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                     ? plane[static_cast<std::size_t>(iy) * w + ix]
                                     : 0.0f;
                    }
                }
            }
        }
    }
}

// out(M,N) += a(M,K) * b(K,N), saxpy order so the inner loop is contiguous.
void gemm_acc(const float* a, const float* b, float* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        float* orow = out + static_cast<std::size_t>(i) * n;
        const float* arow = a + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const float aik = arow[kk];
            const float* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
}

void check_conv_input(const Conv2dLayer& layer, const Tensor& x) {
    if (x.rank() != 4) {
        throw std::invalid_argument("conv2d: input must be rank-4 (N,C,H,W)");
    }
    if (x.extent(1) != layer.in_channels()) {
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.extent(1)) +
                                    " channels, layer expects " +
                                    std::to_string(layer.in_channels()));
    }
    if (conv2d_out_extent(x.extent(2), layer.kernel_h(), layer.stride, layer.padding) < 1 ||
        conv2d_out_extent(x.extent(3), layer.kernel_w(), layer.stride, layer.padding) < 1) {
        throw std::invalid_argument("conv2d: input too small for kernel/stride/padding");
    }
}

}  // namespace

int conv2d_out_extent(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

Conv2dLayer make_conv2d(const std::string& name, int in_channels, int out_channels,
                        int kernel, int stride, int padding, Rng& rng,
                        float bound_gain) {
    const float bound =
        bound_gain * std::sqrt(1.0f / static_cast<float>(in_channels * kernel * kernel));
    Conv2dLayer layer;
    layer.weight = Parameter(
        name + ".weight",
        uniform(rng, Shape{out_channels, in_channels, kernel, kernel}, -bound, bound));
    layer.bias = Parameter(name + ".bias", zeros(Shape{out_channels}));
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

LinearLayer make_linear(const std::string& name, int in_dim, int classes, Rng& rng) {
    if (classes < 2) {
        throw std::invalid_argument("make_linear: need at least 2 classes");
    }
    const float bound = std::sqrt(1.0f / static_cast<float>(in_dim));
    LinearLayer layer;
    layer.weight =
        Parameter(name + ".weight", uniform(rng, Shape{classes, in_dim}, -bound, bound));
    return layer;
}

Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x) {
    check_conv_input(layer, x);
    const int n = x.extent(0);
    const int c_in = x.extent(1);
    const int h = x.extent(2);
    const int w = x.extent(3);
    const int c_out = layer.out_channels();
    const int kh = layer.kernel_h();
    const int kw = layer.kernel_w();
    const int oh = conv2d_out_extent(h, kh, layer.stride, layer.padding);
    const int ow = conv2d_out_extent(w, kw, layer.stride, layer.padding);
    const int patch = c_in * kh * kw;
    const int spatial = oh * ow;

    Tensor out(Shape{n, c_out, oh, ow});
    std::vector<float> col(static_cast<std::size_t>(patch) * spatial);
    const float* bias = layer.bias.value.data();

    for (int i = 0; i < n; ++i) {
        const float* xi = x.data() + static_cast<std::size_t>(i) * c_in * h * w;
        float* oi = out.data() + static_cast<std::size_t>(i) * c_out * spatial;
        im2col(xi, c_in, h, w, kh, kw, layer.stride, layer.padding, oh, ow, col.data());
        for (int c = 0; c < c_out; ++c) {
            float* orow = oi + static_cast<std::size_t>(c) * spatial;
            for (int s = 0; s < spatial; ++s) {
                orow[s] = bias[c];
            }
        }
        gemm_acc(layer.weight.value.data(), col.data(), oi, c_out, patch, spatial);
    }
    return out;
}

Conv2dGrads conv2d_backward(const Conv2dLayer& layer, const Tensor& x,
                            const Tensor& grad_out) {
    check_conv_input(layer, x);
    const int n = x.extent(0);
    const int c_in = x.extent(1);
    const int h = x.extent(2);
    const int w = x.extent(3);
    const int c_out = layer.out_channels();
    const int kh = layer.kernel_h();
    const int kw = layer.kernel_w();
    const int oh = conv2d_out_extent(h, kh, layer.stride, layer.padding);
    const int ow = conv2d_out_extent(w, kw, layer.stride, layer.padding);
    if (grad_out.rank() != 4 || grad_out.extent(0) != n || grad_out.extent(1) != c_out ||
        grad_out.extent(2) != oh || grad_out.extent(3) != ow) {
        throw std::invalid_argument("conv2d_backward: grad_out shape mismatch");
    }
    const int patch = c_in * kh * kw;
    const int spatial = oh * ow;

    Conv2dGrads grads{Tensor(x.shape()), Tensor(layer.weight.value.shape()),
                      Tensor(layer.bias.value.shape())};
    std::vector<float> rows(static_cast<std::size_t>(spatial) * patch);
    std::vector<float> colgrad(static_cast<std::size_t>(patch) * spatial);

    for (int i = 0; i < n; ++i) {
        const float* xi = x.data() + static_cast<std::size_t>(i) * c_in * h * w;
        const float* gi = grad_out.data() + static_cast<std::size_t>(i) * c_out * spatial;

        float* gb = grads.grad_bias.data();
        for (int c = 0; c < c_out; ++c) {
            const float* grow = gi + static_cast<std::size_t>(c) * spatial;
            float acc = 0.0f;
            for (int s = 0; s < spatial; ++s) {
                acc += grow[s];
            }
            gb[c] += acc;
        }

        // grad_weight(C_out, patch) += grad_out(C_out, spatial) * im2row(spatial, patch)
        im2row(xi, c_in, h, w, kh, kw, layer.stride, layer.padding, oh, ow, rows.data());
        gemm_acc(gi, rows.data(), grads.grad_weight.data(), c_out, spatial, patch);

        // colgrad(patch, spatial) = weight^T(patch, C_out) * grad_out(C_out, spatial)
        std::fill(colgrad.begin(), colgrad.end(), 0.0f);
        const float* wdata = layer.weight.value.data();
        for (int k = 0; k < patch; ++k) {
            float* crow = colgrad.data() + static_cast<std::size_t>(k) * spatial;
            for (int c = 0; c < c_out; ++c) {
                const float wt = wdata[static_cast<std::size_t>(c) * patch + k];
                const float* grow = gi + static_cast<std::size_t>(c) * spatial;
                for (int s = 0; s < spatial; ++s) {
                    crow[s] += wt * grow[s];
                }
            }
        }

        // col2im scatter-add back into the input gradient.
        float* gx = grads.grad_x.data() + static_cast<std::size_t>(i) * c_in * h * w;
        for (int c = 0; c < c_in; ++c) {
            for (int r = 0; r < kh; ++r) {
                for (int s = 0; s < kw; ++s) {
                    const float* crow =
                        colgrad.data() +
                        (static_cast<std::size_t>(c) * kh * kw + r * kw + s) *
                            static_cast<std::size_t>(spatial);
                    for (int y = 0; y < oh; ++y) {
                        const int iy = y * layer.stride - layer.padding + r;
                        if (iy < 0 || iy >= h) {
                            continue;
                        }
                        for (int xo = 0; xo < ow; ++xo) {
                            const int ix = xo * layer.stride - layer.padding + s;
                            if (ix >= 0 && ix < w) {
                                gx[(static_cast<std::size_t>(c) * h + iy) * w + ix] +=
                                    crow[y * ow + xo];
                            }
                        }
                    }
                }
            }
        }
    }
    return grads;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape());
    const float* px = x.data();
    float* po = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        po[i] = px[i] > 0.0f ? px[i] : 0.0f;
    }
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    if (!x.same_shape(grad_out)) {
        throw std::invalid_argument("relu_backward: shape mismatch");
    }
    Tensor out(x.shape());
    const float* px = x.data();
    const float* pg = grad_out.data();
    float* po = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        po[i] = px[i] > 0.0f ? pg[i] : 0.0f;
    }
    return out;
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& h) {
    if (h.rank() != 1 || h.extent(0) != layer.in_dim()) {
        throw std::invalid_argument("linear_forward: input length mismatch");
    }
    const int p = layer.classes();
    const int d = layer.in_dim();
    Tensor out(Shape{p});
    const float* wdata = layer.weight.value.data();
    const float* hv = h.data();
    for (int c = 0; c < p; ++c) {
        const float* row = wdata + static_cast<std::size_t>(c) * d;
        float acc = 0.0f;
        for (int j = 0; j < d; ++j) {
            acc += row[j] * hv[j];
        }
        out.at(c) = acc;
    }
    return out;
}

Tensor linear_forward_batch(const LinearLayer& layer, const Tensor& h) {
    if (h.rank() != 2 || h.extent(1) != layer.in_dim()) {
        throw std::invalid_argument("linear_forward_batch: input width mismatch");
    }
    const int n = h.extent(0);
    const int p = layer.classes();
    const int d = layer.in_dim();
    Tensor out(Shape{n, p});
    const float* wdata = layer.weight.value.data();
    for (int i = 0; i < n; ++i) {
        const float* hv = h.data() + static_cast<std::size_t>(i) * d;
        float* orow = out.data() + static_cast<std::size_t>(i) * p;
        for (int c = 0; c < p; ++c) {
            const float* row = wdata + static_cast<std::size_t>(c) * d;
            float acc = 0.0f;
            for (int j = 0; j < d; ++j) {
                acc += row[j] * hv[j];
            }
            orow[c] = acc;
        }
    }
    return out;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1) {
        throw std::invalid_argument("softmax_cross_entropy: logits must be rank-1");
    }
    const int p = logits.extent(0);
    if (label < 0 || label >= p) {
        throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    const float* lv = logits.data();
    double maxv = lv[0];
    for (int c = 1; c < p; ++c) {
        maxv = std::max(maxv, static_cast<double>(lv[c]));
    }
    double sum = 0.0;
    for (int c = 0; c < p; ++c) {
        sum += std::exp(static_cast<double>(lv[c]) - maxv);
    }
    SoftmaxCrossEntropy result;
    result.grad_logits = Tensor(logits.shape());
    float* gv = result.grad_logits.data();
    for (int c = 0; c < p; ++c) {
        const double prob = std::exp(static_cast<double>(lv[c]) - maxv) / sum;
        gv[c] = static_cast<float>(c == label ? prob - 1.0 : prob);
    }
    result.loss =
        static_cast<float>(-(static_cast<double>(lv[label]) - maxv - std::log(sum)));
    return result;
}

SgdMomentum::SgdMomentum(float base_lr, float momentum, int decay_epoch)
    : base_lr_(base_lr), momentum_(momentum), decay_epoch_(decay_epoch) {
    if (base_lr < 0.0f) {
        throw std::invalid_argument("SgdMomentum: base_lr must be non-negative");
    }
    if (momentum < 0.0f || momentum >= 1.0f) {
        throw std::invalid_argument("SgdMomentum: momentum must be in [0,1)");
    }
}

float SgdMomentum::lr_at(int epoch) const {
    return epoch < decay_epoch_ ? base_lr_ : base_lr_ / 10.0f;
}

void SgdMomentum::step(std::span<Parameter* const> params, int epoch) {
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const Parameter* p : params) {
            velocity_.emplace_back(p->value.shape());
        }
    }
    if (velocity_.size() != params.size()) {
        throw std::invalid_argument("SgdMomentum: parameter list changed size");
    }
    const float lr = lr_at(epoch);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        Tensor& v = velocity_[k];
        if (!v.same_shape(p.value) || !p.grad.same_shape(p.value)) {
            throw std::invalid_argument("SgdMomentum: shape mismatch for " + p.name);
        }
        const float scale = lr * p.lr_mult;
        float* pv = p.value.data();
        const float* pg = p.grad.data();
        float* vv = v.data();
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            vv[i] = momentum_ * vv[i] + pg[i];
            pv[i] -= scale * vv[i];
        }
    }
}

void sgd_step(SgdMomentum& opt, std::span<Parameter* const> params, int epoch) {
    opt.step(params, epoch);
}

}  // namespace hpm
