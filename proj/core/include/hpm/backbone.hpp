#pragma once

#include <array>
#include <vector>

#include "hpm/nn.hpp"

namespace hpm {

/// Geometry contract: input extents are multiples of 16 and the output height
/// H/16 is a positive multiple of 8, so every default pyramid scale divides it.
struct BackboneConfig {
    int in_channels = 3;
    std::array<int, 4> stage_channels{16, 32, 64, 64};
    int input_height = 128;
    int input_width = 64;
};

/// Stem conv (3x3, stride 2) plus four stages of two 3x3 conv+ReLU layers with
/// stage strides [2, 2, 2, 1]; the stride-1 last stage keeps the output at
/// 1/16 of the input instead of 1/32.
struct BackboneModel {
    BackboneConfig cfg;
    std::vector<Conv2dLayer> layers;

    int out_channels() const { return cfg.stage_channels[3]; }
    int out_height() const { return cfg.input_height / 16; }
    int out_width() const { return cfg.input_width / 16; }
};

void validate_backbone_geometry(const BackboneConfig& cfg);

/// Layer stack without the geometry gate; used by build_backbone and by tests
/// that need off-contract input sizes.
std::vector<Conv2dLayer> build_backbone_layers(int in_channels,
                                               const std::array<int, 4>& stage_channels,
                                               Rng& rng);

BackboneModel build_backbone(const BackboneConfig& cfg, Rng& rng);

/// Per-layer inputs and pre-activations kept for the backward pass.
struct BackboneTrace {
    std::vector<Tensor> inputs;
    std::vector<Tensor> preact;
    Tensor output;
};

Tensor backbone_forward(const BackboneModel& model, const Tensor& images);
BackboneTrace backbone_forward_trace(const BackboneModel& model, const Tensor& images);

/// Accumulates parameter gradients into the model; returns the gradient with
/// respect to the input images.
Tensor backbone_backward(BackboneModel& model, const BackboneTrace& trace,
                         const Tensor& grad_output);

std::vector<Parameter*> backbone_parameters(BackboneModel& model);

}  // namespace hpm
