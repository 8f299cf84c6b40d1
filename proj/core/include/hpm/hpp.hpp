#pragma once

#include <span>
#include <string>
#include <vector>

#include "hpm/nn.hpp"

namespace hpm {

enum class Pooling { avg, max, avg_plus_max };

Pooling pooling_from_string(const std::string& s);
std::string pooling_to_string(Pooling p);

/// Scale set, reduced dimension and pooling strategy of the pyramid head.
/// Scales must be strictly increasing and each must divide the feature height.
struct PyramidConfig {
    std::vector<int> scales{1, 2, 4, 8};
    int reduced_dim = 32;
    Pooling pooling = Pooling::avg_plus_max;
    int num_classes = 0;
};

int total_bins(const PyramidConfig& cfg);
void validate_pyramid_config(const PyramidConfig& cfg);

/// One 1x1 reduction conv and one bias-free classifier per bin; no parameter
/// sharing anywhere. Bin (i, j) is scale index i, bin index j, flattened
/// scale-major.
struct PyramidHead {
    PyramidConfig cfg;
    int in_channels = 0;
    std::vector<Conv2dLayer> reduce;
    std::vector<LinearLayer> fc;

    int bin_index(int scale_idx, int bin) const;
};

PyramidHead build_head(const PyramidConfig& cfg, int in_channels, Rng& rng);

/// Horizontal equal slices: bin j of scale n covers rows [j*H/n, (j+1)*H/n).
std::vector<Tensor> slice_bins(const Tensor& feature, int scale);

/// (N, C, h, W) -> (N, C). avg is the spatial mean, max the spatial maximum,
/// avg_plus_max their elementwise sum.
Tensor pool_bin(const Tensor& bin, Pooling strategy);

/// Per-bin tensors produced by head_forward, one entry per bin in scale-major
/// order: pooled G (N, C_in), reduced H (N, reduced_dim), logits (N, P).
struct BinFeatures {
    std::vector<Tensor> pooled;
    std::vector<Tensor> reduced;
    std::vector<Tensor> logits;
};

BinFeatures head_forward(const PyramidHead& head, const Tensor& feature);

/// Accumulates head parameter gradients; returns the gradient with respect to
/// the feature map. Max-pool gradient goes to the first argmax in row-major
/// order; avg-pool gradient spreads uniformly.
Tensor head_backward(PyramidHead& head, const Tensor& feature, const BinFeatures& fwd,
                     const std::vector<Tensor>& grad_logits);

struct HpmLoss {
    float loss = 0.0f;
    std::vector<Tensor> grad_logits;
};

/// Sum of softmax cross-entropy over every branch and every sample.
HpmLoss hpm_loss(const std::vector<Tensor>& bin_logits, std::span<const int> labels);

/// Argmax over a rank-1 logits row; ties go to the lowest index.
int predict_bin(const Tensor& logits_row);

std::vector<Parameter*> head_parameters(PyramidHead& head);

}  // namespace hpm
