#include "hpm/hpp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hpm {
namespace {

void check_feature(const Tensor& feature) {
    if (feature.rank() != 4) {
        throw std::invalid_argument("hpp: feature map must be rank-4 (N,C,H,W)");
    }
}

}  // namespace

Pooling pooling_from_string(const std::string& s) {
    if (s == "avg") return Pooling::avg;
    if (s == "max") return Pooling::max;
    if (s == "avg_plus_max") return Pooling::avg_plus_max;
    throw std::invalid_argument("unknown pooling strategy: " + s);
}

std::string pooling_to_string(Pooling p) {
    switch (p) {
        case Pooling::avg: return "avg";
        case Pooling::max: return "max";
        case Pooling::avg_plus_max: return "avg_plus_max";
    }
    return "avg_plus_max";
}

int total_bins(const PyramidConfig& cfg) {
    int total = 0;
    for (int s : cfg.scales) {
        total += s;
    }
    return total;
}

void validate_pyramid_config(const PyramidConfig& cfg) {
    if (cfg.scales.empty()) {
        throw std::invalid_argument("pyramid: scale set must be non-empty");
    }
    int prev = 0;
    for (int s : cfg.scales) {
        if (s <= prev) {
            throw std::invalid_argument("pyramid: scales must be strictly increasing");
        }
        prev = s;
    }
    if (cfg.reduced_dim < 1) {
        throw std::invalid_argument("pyramid: reduced_dim must be positive");
    }
    if (cfg.num_classes < 2) {
        throw std::invalid_argument("pyramid: need at least 2 classes");
    }
}

int PyramidHead::bin_index(int scale_idx, int bin) const {
    int base = 0;
    for (int i = 0; i < scale_idx; ++i) {
        base += cfg.scales[static_cast<std::size_t>(i)];
    }
    return base + bin;
}

PyramidHead build_head(const PyramidConfig& cfg, int in_channels, Rng& rng) {
    validate_pyramid_config(cfg);
    PyramidHead head;
    head.cfg = cfg;
    head.in_channels = in_channels;
    const int bins = total_bins(cfg);
    head.reduce.reserve(static_cast<std::size_t>(bins));
    head.fc.reserve(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
        for (int j = 0; j < cfg.scales[i]; ++j) {
            const std::string suffix = std::to_string(i) + "_" + std::to_string(j);
            head.reduce.push_back(
                make_conv2d("reduce_" + suffix, in_channels, cfg.reduced_dim, 1, 1, 0, rng));
            head.fc.push_back(
                make_linear("fc_" + suffix, cfg.reduced_dim, cfg.num_classes, rng));
        }
    }
    return head;
}

std::vector<Tensor> slice_bins(const Tensor& feature, int scale) {
    check_feature(feature);
    const int n = feature.extent(0);
    const int c = feature.extent(1);
    const int h = feature.extent(2);
    const int w = feature.extent(3);
    if (scale < 1 || h % scale != 0) {
        throw std::invalid_argument("slice_bins: scale must divide the feature height");
    }
    const int bh = h / scale;
    std::vector<Tensor> bins;
    bins.reserve(static_cast<std::size_t>(scale));
    for (int j = 0; j < scale; ++j) {
        Tensor bin(Shape{n, c, bh, w});
        float* dst = bin.data();
        for (int i = 0; i < n; ++i) {
            for (int ch = 0; ch < c; ++ch) {
                const float* src = feature.data() +
                                   ((static_cast<std::size_t>(i) * c + ch) * h +
                                    static_cast<std::size_t>(j) * bh) *
                                       w;
                std::copy(src, src + static_cast<std::size_t>(bh) * w,
                          dst + ((static_cast<std::size_t>(i) * c + ch) *
                                 static_cast<std::size_t>(bh)) *
                                    w);
            }
        }
        bins.push_back(std::move(bin));
    }
    return bins;
}

Tensor pool_bin(const Tensor& bin, Pooling strategy) {
    check_feature(bin);
    const int n = bin.extent(0);
    const int c = bin.extent(1);
    const int h = bin.extent(2);
    const int w = bin.extent(3);
    const int area = h * w;
    Tensor out(Shape{n, c});
    float* po = out.data();
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const float* p =
                bin.data() + (static_cast<std::size_t>(i) * c + ch) * static_cast<std::size_t>(area);
            float mx = -std::numeric_limits<float>::infinity();
            float sum = 0.0f;
            for (int k = 0; k < area; ++k) {
                sum += p[k];
                mx = std::max(mx, p[k]);
            }
            const float avg = sum / static_cast<float>(area);
            float v = 0.0f;
            switch (strategy) {
                case Pooling::avg: v = avg; break;
                case Pooling::max: v = mx; break;
                case Pooling::avg_plus_max: v = avg + mx; break;
            }
            po[static_cast<std::size_t>(i) * c + ch] = v;
        }
    }
    return out;
}

BinFeatures head_forward(const PyramidHead& head, const Tensor& feature) {
    check_feature(feature);
    if (feature.extent(1) != head.in_channels) {
        throw std::invalid_argument("head_forward: channel count mismatch");
    }
    const int n = feature.extent(0);
    const int c = feature.extent(1);
    for (int s : head.cfg.scales) {
        if (feature.extent(2) % s != 0) {
            throw std::invalid_argument("head_forward: scale does not divide feature height");
        }
    }
    BinFeatures out;
    const int bins = total_bins(head.cfg);
    out.pooled.reserve(static_cast<std::size_t>(bins));
    out.reduced.reserve(static_cast<std::size_t>(bins));
    out.logits.reserve(static_cast<std::size_t>(bins));
    int b = 0;
    for (int s : head.cfg.scales) {
        std::vector<Tensor> slices = slice_bins(feature, s);
        for (int j = 0; j < s; ++j, ++b) {
            Tensor pooled = pool_bin(slices[static_cast<std::size_t>(j)], head.cfg.pooling);
            Tensor reduced4 = conv2d_forward(head.reduce[static_cast<std::size_t>(b)],
                                             pooled.reshaped(Shape{n, c, 1, 1}));
            Tensor reduced = reduced4.reshaped(Shape{n, head.cfg.reduced_dim});
            Tensor logits =
                linear_forward_batch(head.fc[static_cast<std::size_t>(b)], reduced);
            out.pooled.push_back(std::move(pooled));
            out.reduced.push_back(std::move(reduced));
            out.logits.push_back(std::move(logits));
        }
    }
    return out;
}

Tensor head_backward(PyramidHead& head, const Tensor& feature, const BinFeatures& fwd,
                     const std::vector<Tensor>& grad_logits) {
    check_feature(feature);
    const int bins = total_bins(head.cfg);
    if (static_cast<int>(grad_logits.size()) != bins ||
        static_cast<int>(fwd.logits.size()) != bins) {
        throw std::invalid_argument("head_backward: expected one gradient per bin");
    }
    const int n = feature.extent(0);
    const int c = feature.extent(1);
    const int h = feature.extent(2);
    const int w = feature.extent(3);
    const int rdim = head.cfg.reduced_dim;
    const int classes = head.cfg.num_classes;

    Tensor grad_feature(feature.shape());
    int b = 0;
    for (std::size_t si = 0; si < head.cfg.scales.size(); ++si) {
        const int s = head.cfg.scales[si];
        const int bh = h / s;
        const int area = bh * w;
        for (int j = 0; j < s; ++j, ++b) {
            const auto bi = static_cast<std::size_t>(b);
            const Tensor& glog = grad_logits[bi];
            if (glog.rank() != 2 || glog.extent(0) != n || glog.extent(1) != classes) {
                throw std::invalid_argument("head_backward: grad_logits shape mismatch");
            }

            // Classifier: grad_W += glog^T * H; grad_H = glog * W.
            LinearLayer& fc = head.fc[bi];
            const Tensor& reduced = fwd.reduced[bi];
            float* gw = fc.weight.grad.data();
            const float* wv = fc.weight.value.data();
            Tensor grad_reduced(Shape{n, rdim});
            float* gh = grad_reduced.data();
            for (int i = 0; i < n; ++i) {
                const float* grow = glog.data() + static_cast<std::size_t>(i) * classes;
                const float* hrow = reduced.data() + static_cast<std::size_t>(i) * rdim;
                float* ghrow = gh + static_cast<std::size_t>(i) * rdim;
                for (int cls = 0; cls < classes; ++cls) {
                    const float g = grow[cls];
                    if (g == 0.0f) {
                        continue;
                    }
                    float* gwrow = gw + static_cast<std::size_t>(cls) * rdim;
                    const float* wrow = wv + static_cast<std::size_t>(cls) * rdim;
                    for (int d = 0; d < rdim; ++d) {
                        gwrow[d] += g * hrow[d];
                        ghrow[d] += g * wrow[d];
                    }
                }
            }

            // 1x1 reduction conv.
            Conv2dLayer& red = head.reduce[bi];
            Conv2dGrads cg = conv2d_backward(red, fwd.pooled[bi].reshaped(Shape{n, c, 1, 1}),
                                             grad_reduced.reshaped(Shape{n, rdim, 1, 1}));
            float* rw = red.weight.grad.data();
            const float* dw = cg.grad_weight.data();
            for (std::size_t k = 0; k < red.weight.grad.size(); ++k) {
                rw[k] += dw[k];
            }
            float* rb = red.bias.grad.data();
            const float* db = cg.grad_bias.data();
            for (std::size_t k = 0; k < red.bias.grad.size(); ++k) {
                rb[k] += db[k];
            }

            // Pooling backward into the bin's row range of the feature map.
            const Tensor& grad_pooled4 = cg.grad_x;  // (N, C, 1, 1)
            for (int i = 0; i < n; ++i) {
                for (int ch = 0; ch < c; ++ch) {
                    const float g =
                        grad_pooled4.data()[static_cast<std::size_t>(i) * c + ch];
                    if (g == 0.0f) {
                        continue;
                    }
                    const float* src = feature.data() +
                                       ((static_cast<std::size_t>(i) * c + ch) * h +
                                        static_cast<std::size_t>(j) * bh) *
                                           w;
                    float* dst = grad_feature.data() +
                                 ((static_cast<std::size_t>(i) * c + ch) * h +
                                  static_cast<std::size_t>(j) * bh) *
                                     w;
                    if (head.cfg.pooling == Pooling::avg ||
                        head.cfg.pooling == Pooling::avg_plus_max) {
                        const float share = g / static_cast<float>(area);
                        for (int k = 0; k < area; ++k) {
                            dst[k] += share;
                        }
                    }
                    if (head.cfg.pooling == Pooling::max ||
                        head.cfg.pooling == Pooling::avg_plus_max) {
                        int arg = 0;
                        float best = src[0];
                        for (int k = 1; k < area; ++k) {
                            if (src[k] > best) {
                                best = src[k];
                                arg = k;
                            }
                        }
                        dst[arg] += g;
                    }
                }
            }
        }
    }
    return grad_feature;
}

HpmLoss hpm_loss(const std::vector<Tensor>& bin_logits, std::span<const int> labels) {
    if (bin_logits.empty()) {
        throw std::invalid_argument("hpm_loss: no branches");
    }
    const int n = bin_logits.front().extent(0);
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw std::invalid_argument("hpm_loss: label count mismatch");
    }
    HpmLoss result;
    result.grad_logits.reserve(bin_logits.size());
    double total = 0.0;
    for (const Tensor& logits : bin_logits) {
        if (logits.rank() != 2 || logits.extent(0) != n) {
            throw std::invalid_argument("hpm_loss: logits shape mismatch");
        }
        const int p = logits.extent(1);
        Tensor grad(logits.shape());
        for (int i = 0; i < n; ++i) {
            Tensor row(Shape{p},
                       std::vector<float>(logits.data() + static_cast<std::size_t>(i) * p,
                                          logits.data() + static_cast<std::size_t>(i + 1) * p));
            SoftmaxCrossEntropy ce = softmax_cross_entropy(row, labels[static_cast<std::size_t>(i)]);
            total += ce.loss;
            std::copy(ce.grad_logits.data(), ce.grad_logits.data() + p,
                      grad.data() + static_cast<std::size_t>(i) * p);
        }
        result.grad_logits.push_back(std::move(grad));
    }
    result.loss = static_cast<float>(total);
    return result;
}

int predict_bin(const Tensor& logits_row) {
    if (logits_row.rank() != 1 || logits_row.extent(0) < 1) {
        throw std::invalid_argument("predict_bin: logits must be a non-empty rank-1 row");
    }
    const float* p = logits_row.data();
    int arg = 0;
    for (int i = 1; i < logits_row.extent(0); ++i) {
        if (p[i] > p[arg]) {
            arg = i;
        }
    }
    return arg;
}

std::vector<Parameter*> head_parameters(PyramidHead& head) {
    std::vector<Parameter*> params;
    params.reserve(head.reduce.size() * 2 + head.fc.size());
    for (Conv2dLayer& layer : head.reduce) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    for (LinearLayer& layer : head.fc) {
        params.push_back(&layer.weight);
    }
    return params;
}

}  // namespace hpm
