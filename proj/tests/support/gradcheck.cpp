#include "support/gradcheck.hpp"

#include <functional>

#include "hpm/rng.hpp"
#include "support/oracles.hpp"

namespace gradcheck {
namespace {

using hpm::BackboneModel;
using hpm::BackboneTrace;
using hpm::Parameter;
using hpm::PyramidHead;
using hpm::Tensor;

std::vector<char> relu_signs(const BackboneTrace& trace) {
    std::vector<char> signs;
    for (const Tensor& pre : trace.preact) {
        for (std::size_t i = 0; i < pre.size(); ++i) {
            signs.push_back(pre.data()[i] > 0.0f ? 1 : 0);
        }
    }
    return signs;
}

std::vector<int> pool_argmaxes(const PyramidHead& head, const Tensor& feature) {
    std::vector<int> args;
    if (head.cfg.pooling == hpm::Pooling::avg) {
        return args;
    }
    const int n = feature.extent(0);
    const int c = feature.extent(1);
    const int h = feature.extent(2);
    const int w = feature.extent(3);
    for (int s : head.cfg.scales) {
        const int bh = h / s;
        for (int j = 0; j < s; ++j) {
            for (int i = 0; i < n; ++i) {
                for (int ch = 0; ch < c; ++ch) {
                    const float* src = feature.data() +
                                       ((static_cast<std::size_t>(i) * c + ch) * h +
                                        static_cast<std::size_t>(j) * bh) *
                                           w;
                    int arg = 0;
                    for (int k = 1; k < bh * w; ++k) {
                        if (src[k] > src[arg]) {
                            arg = k;
                        }
                    }
                    args.push_back(arg);
                }
            }
        }
    }
    return args;
}

struct Coordinate {
    float* value;
    float analytic;
};

// Generic driver: evaluates the objective via f(), detects kinks via the
// caller-supplied snapshot function, and compares against analytic grads.
Stats run_checks(const std::vector<Coordinate>& coords,
                 const std::function<double()>& objective,
                 const std::function<std::vector<char>()>& kink_snapshot, double step,
                 double rel, double floor) {
    Stats stats;
    for (const Coordinate& coord : coords) {
        const float saved = *coord.value;
        *coord.value = static_cast<float>(static_cast<double>(saved) + step);
        const std::vector<char> up = kink_snapshot();
        *coord.value = static_cast<float>(static_cast<double>(saved) - step);
        const std::vector<char> down = kink_snapshot();
        *coord.value = saved;
        if (up != down) {
            ++stats.skipped;
            continue;
        }
        const double fd = oracles::central_difference(coord.value, step, objective);
        ++stats.checked;
        if (!oracles::gradient_close(coord.analytic, fd, rel, floor)) {
            ++stats.failed;
        }
    }
    return stats;
}

std::vector<Coordinate> sample_coordinates(const std::vector<Parameter*>& params,
                                           int samples_per_tensor, hpm::Rng& rng) {
    std::vector<Coordinate> coords;
    for (Parameter* p : params) {
        const int size = static_cast<int>(p->value.size());
        const int take = std::min(samples_per_tensor, size);
        for (int t = 0; t < take; ++t) {
            const auto i = static_cast<std::size_t>(rng.next_int(0, size - 1));
            coords.push_back({&p->value.values()[i], p->grad.data()[i]});
        }
    }
    return coords;
}

}  // namespace

Stats check_backbone(BackboneModel& model, Tensor& images, int samples_per_tensor,
                     double step, double rel, double floor, std::uint64_t seed) {
    hpm::Rng rng(seed);
    const Tensor out0 = hpm::backbone_forward(model, images);
    std::vector<float> weights(out0.size());
    for (float& v : weights) {
        v = rng.next_uniform(-1.0f, 1.0f);
    }

    for (Parameter* p : hpm::backbone_parameters(model)) {
        p->zero_grad();
    }
    const BackboneTrace trace = hpm::backbone_forward_trace(model, images);
    const Tensor grad_images =
        hpm::backbone_backward(model, trace, Tensor(out0.shape(), weights));

    const auto objective = [&]() {
        return oracles::ref_backbone_objective(model, images, weights);
    };
    const auto snapshot = [&]() {
        return relu_signs(hpm::backbone_forward_trace(model, images));
    };

    std::vector<Coordinate> coords =
        sample_coordinates(hpm::backbone_parameters(model), samples_per_tensor, rng);
    for (int t = 0; t < 3 * samples_per_tensor; ++t) {
        const auto i =
            static_cast<std::size_t>(rng.next_int(0, static_cast<int>(images.size()) - 1));
        coords.push_back({&images.values()[i], grad_images.data()[i]});
    }
    return run_checks(coords, objective, snapshot, step, rel, floor);
}

Stats check_head(PyramidHead& head, Tensor& feature, const std::vector<int>& labels,
                 int samples_per_tensor, double step, double rel, double floor,
                 std::uint64_t seed) {
    hpm::Rng rng(seed);
    for (Parameter* p : hpm::head_parameters(head)) {
        p->zero_grad();
    }
    const hpm::BinFeatures fwd = hpm::head_forward(head, feature);
    const hpm::HpmLoss loss = hpm::hpm_loss(fwd.logits, labels);
    const Tensor grad_feature = hpm::head_backward(head, feature, fwd, loss.grad_logits);

    const auto objective = [&]() { return oracles::ref_head_loss(head, feature, labels); };
    const auto snapshot = [&]() {
        const std::vector<int> args = pool_argmaxes(head, feature);
        std::vector<char> bytes;
        bytes.reserve(args.size() * sizeof(int));
        for (int a : args) {
            for (std::size_t k = 0; k < sizeof(int); ++k) {
                bytes.push_back(static_cast<char>((a >> (8 * k)) & 0xff));
            }
        }
        return bytes;
    };

    std::vector<Coordinate> coords =
        sample_coordinates(hpm::head_parameters(head), samples_per_tensor, rng);
    for (int t = 0; t < 4 * samples_per_tensor; ++t) {
        const auto i = static_cast<std::size_t>(
            rng.next_int(0, static_cast<int>(feature.size()) - 1));
        coords.push_back({&feature.values()[i], grad_feature.data()[i]});
    }
    return run_checks(coords, objective, snapshot, step, rel, floor);
}

Stats check_composite(BackboneModel& model, PyramidHead& head, Tensor& images,
                      const std::vector<int>& labels, int samples_per_tensor, double step,
                      double rel, double floor, std::uint64_t seed) {
    hpm::Rng rng(seed);
    std::vector<Parameter*> params = hpm::backbone_parameters(model);
    for (Parameter* p : hpm::head_parameters(head)) {
        params.push_back(p);
    }
    for (Parameter* p : params) {
        p->zero_grad();
    }
    const BackboneTrace trace = hpm::backbone_forward_trace(model, images);
    const hpm::BinFeatures fwd = hpm::head_forward(head, trace.output);
    const hpm::HpmLoss loss = hpm::hpm_loss(fwd.logits, labels);
    const Tensor grad_feature =
        hpm::head_backward(head, trace.output, fwd, loss.grad_logits);
    const Tensor grad_images = hpm::backbone_backward(model, trace, grad_feature);

    const auto objective = [&]() {
        return oracles::ref_composite_loss(model, head, images, labels);
    };
    const auto snapshot = [&]() {
        const BackboneTrace t = hpm::backbone_forward_trace(model, images);
        std::vector<char> bytes = relu_signs(t);
        for (int a : pool_argmaxes(head, t.output)) {
            for (std::size_t k = 0; k < sizeof(int); ++k) {
                bytes.push_back(static_cast<char>((a >> (8 * k)) & 0xff));
            }
        }
        return bytes;
    };

    std::vector<Coordinate> coords = sample_coordinates(params, samples_per_tensor, rng);
    for (int t = 0; t < 2 * samples_per_tensor; ++t) {
        const auto i =
            static_cast<std::size_t>(rng.next_int(0, static_cast<int>(images.size()) - 1));
        coords.push_back({&images.values()[i], grad_images.data()[i]});
    }
    return run_checks(coords, objective, snapshot, step, rel, floor);
}

}  // namespace gradcheck
