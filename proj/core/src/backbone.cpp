#include "hpm/backbone.hpp"
#include <cmath>

#include <stdexcept>
#include <string>

namespace hpm {
namespace {

constexpr std::array<int, 4> kStageStrides{2, 2, 2, 1};

void check_image_shape(const BackboneModel& model, const Tensor& images) {
    if (images.rank() != 4 || images.extent(1) != model.cfg.in_channels ||
        images.extent(2) != model.cfg.input_height ||
        images.extent(3) != model.cfg.input_width) {
        throw std::invalid_argument("backbone: image shape does not match config");
    }
}

}  // namespace

void validate_backbone_geometry(const BackboneConfig& cfg) {
    if (cfg.input_height % 16 != 0 || cfg.input_width % 16 != 0) {
        throw std::invalid_argument("backbone: input extents must be multiples of 16, got " +
                                    std::to_string(cfg.input_height) + "x" +
                                    std::to_string(cfg.input_width));
    }
    if ((cfg.input_height / 16) % 8 != 0) {
        throw std::invalid_argument(
            "backbone: output height must be a multiple of 8, got " +
            std::to_string(cfg.input_height / 16));
    }
    if (cfg.in_channels < 1) {
        throw std::invalid_argument("backbone: in_channels must be >= 1");
    }
    for (int c : cfg.stage_channels) {
        if (c < 1) {
            throw std::invalid_argument("backbone: stage channels must be >= 1");
        }
    }
}

std::vector<Conv2dLayer> build_backbone_layers(int in_channels,
                                               const std::array<int, 4>& stage_channels,
                                               Rng& rng) {
    // Every conv feeds a ReLU, so init with the ReLU gain.
    const float gain = std::sqrt(6.0f);
    std::vector<Conv2dLayer> layers;
    layers.reserve(9);
    layers.push_back(
        make_conv2d("stem", in_channels, stage_channels[0], 3, 2, 1, rng, gain));
    int prev = stage_channels[0];
    for (int s = 0; s < 4; ++s) {
        const int ch = stage_channels[static_cast<std::size_t>(s)];
        const std::string base = "s" + std::to_string(s + 1);
        layers.push_back(make_conv2d(base + "a", prev, ch, 3,
                                     kStageStrides[static_cast<std::size_t>(s)], 1, rng,
                                     gain));
        layers.push_back(make_conv2d(base + "b", ch, ch, 3, 1, 1, rng, gain));
        prev = ch;
    }
    return layers;
}

BackboneModel build_backbone(const BackboneConfig& cfg, Rng& rng) {
    validate_backbone_geometry(cfg);
    BackboneModel model;
    model.cfg = cfg;
    model.layers = build_backbone_layers(cfg.in_channels, cfg.stage_channels, rng);
    return model;
}

Tensor backbone_forward(const BackboneModel& model, const Tensor& images) {
    check_image_shape(model, images);
    Tensor x = images;
    for (const Conv2dLayer& layer : model.layers) {
        x = relu_forward(conv2d_forward(layer, x));
    }
    return x;
}

BackboneTrace backbone_forward_trace(const BackboneModel& model, const Tensor& images) {
    check_image_shape(model, images);
    BackboneTrace trace;
    trace.inputs.reserve(model.layers.size());
    trace.preact.reserve(model.layers.size());
    Tensor x = images;
    for (const Conv2dLayer& layer : model.layers) {
        trace.inputs.push_back(x);
        Tensor pre = conv2d_forward(layer, x);
        x = relu_forward(pre);
        trace.preact.push_back(std::move(pre));
    }
    trace.output = std::move(x);
    return trace;
}

Tensor backbone_backward(BackboneModel& model, const BackboneTrace& trace,
                         const Tensor& grad_output) {
    if (trace.inputs.size() != model.layers.size()) {
        throw std::invalid_argument("backbone_backward: trace does not match model");
    }
    Tensor grad = grad_output;
    for (int i = static_cast<int>(model.layers.size()) - 1; i >= 0; --i) {
        Conv2dLayer& layer = model.layers[static_cast<std::size_t>(i)];
        const auto idx = static_cast<std::size_t>(i);
        grad = relu_backward(trace.preact[idx], grad);
        Conv2dGrads grads = conv2d_backward(layer, trace.inputs[idx], grad);
        float* gw = layer.weight.grad.data();
        const float* dw = grads.grad_weight.data();
        for (std::size_t k = 0; k < layer.weight.grad.size(); ++k) {
            gw[k] += dw[k];
        }
        float* gb = layer.bias.grad.data();
        const float* db = grads.grad_bias.data();
        for (std::size_t k = 0; k < layer.bias.grad.size(); ++k) {
            gb[k] += db[k];
        }
        grad = std::move(grads.grad_x);
    }
    return grad;
}

std::vector<Parameter*> backbone_parameters(BackboneModel& model) {
    std::vector<Parameter*> params;
    params.reserve(model.layers.size() * 2);
    for (Conv2dLayer& layer : model.layers) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    return params;
}

}  // namespace hpm
