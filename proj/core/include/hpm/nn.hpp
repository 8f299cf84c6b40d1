#pragma once

#include <span>
#include <string>
#include <vector>

#include "hpm/tensor.hpp"

namespace hpm {

/// Trainable tensor with its gradient accumulator and a per-group learning
/// rate multiplier.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    float lr_mult = 1.0f;

    Parameter() = default;
    Parameter(std::string n, Tensor v, float mult = 1.0f)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()), lr_mult(mult) {}

    void zero_grad() { std::fill(grad.values().begin(), grad.values().end(), 0.0f); }
};

/// 2-D cross-correlation layer. weight is (out_channels, in_channels, kh, kw),
/// bias is (out_channels).
struct Conv2dLayer {
    Parameter weight;
    Parameter bias;
    int stride = 1;
    int padding = 0;

    int out_channels() const { return weight.value.extent(0); }
    int in_channels() const { return weight.value.extent(1); }
    int kernel_h() const { return weight.value.extent(2); }
    int kernel_w() const { return weight.value.extent(3); }
};

/// Fan-in uniform init: weights in [-a * bound_gain, a * bound_gain] with
/// a = sqrt(1/fan_in), bias zero. Layers feeding a ReLU need the
/// sqrt(6) gain or a deep stack attenuates to zero; plain linear layers
/// keep gain 1.
Conv2dLayer make_conv2d(const std::string& name, int in_channels, int out_channels,
                        int kernel, int stride, int padding, Rng& rng,
                        float bound_gain = 1.0f);

/// Classifier layer; weight is (classes, in_dim). No bias term: the
/// prediction is W^T h only.
struct LinearLayer {
    Parameter weight;

    int classes() const { return weight.value.extent(0); }
    int in_dim() const { return weight.value.extent(1); }
};

LinearLayer make_linear(const std::string& name, int in_dim, int classes, Rng& rng);

int conv2d_out_extent(int in, int kernel, int stride, int padding);

/// x is (N, C_in, H, W); result is (N, C_out, H', W').
Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& x);

struct Conv2dGrads {
    Tensor grad_x;
    Tensor grad_weight;
    Tensor grad_bias;
};

/// Analytic gradients of conv2d_forward with respect to input, weight, bias.
Conv2dGrads conv2d_backward(const Conv2dLayer& layer, const Tensor& x,
                            const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);
/// Masks grad_out where x <= 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

/// h is rank-1 (in_dim); result is rank-1 (classes).
Tensor linear_forward(const LinearLayer& layer, const Tensor& h);

/// h is (N, in_dim); result is (N, classes).
Tensor linear_forward_batch(const LinearLayer& layer, const Tensor& h);

struct SoftmaxCrossEntropy {
    float loss = 0.0f;
    Tensor grad_logits;
};

/// loss = -log softmax(logits)[label], max-subtraction stabilized;
/// gradient = softmax(logits) - onehot(label).
SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, int label);

/// SGD with momentum and a step learning-rate schedule: base_lr before
/// decay_epoch, base_lr/10 from decay_epoch on. Velocities are kept per
/// parameter slot, matched by position across step calls.
class SgdMomentum {
public:
    SgdMomentum(float base_lr, float momentum, int decay_epoch);

    float lr_at(int epoch) const;
    void step(std::span<Parameter* const> params, int epoch);

    float base_lr() const { return base_lr_; }
    float momentum() const { return momentum_; }

private:
    float base_lr_;
    float momentum_;
    int decay_epoch_;
    std::vector<Tensor> velocity_;
};

/// v <- momentum*v + g; p <- p - lr(epoch)*mult*v for every parameter.
void sgd_step(SgdMomentum& opt, std::span<Parameter* const> params, int epoch);

}  // namespace hpm
