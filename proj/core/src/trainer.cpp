#include "hpm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

#include "hpm/errors.hpp"

namespace hpm {
namespace {

std::vector<int> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<int>(i);
    }
    // Fisher-Yates with our own rng keeps the order portable.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_int(0, static_cast<int>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Tensor batch_from(const std::vector<Tensor>& images) {
    const Tensor& first = images.front();
    const int c = first.extent(0);
    const int h = first.extent(1);
    const int w = first.extent(2);
    Tensor batch(Shape{static_cast<int>(images.size()), c, h, w});
    const std::size_t stride = first.size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::copy(images[i].data(), images[i].data() + stride,
                  batch.data() + i * stride);
    }
    return batch;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.batch_size < 1) {
        throw ConfigError("train: batch_size must be >= 1");
    }
    if (cfg.epochs < 0 || cfg.decay_epoch < 0) {
        throw ConfigError("train: epochs and decay_epoch must be >= 0");
    }
    if (cfg.epochs > 0 && cfg.decay_epoch > cfg.epochs) {
        throw ConfigError("train: decay_epoch must be <= epochs");
    }
    if (cfg.base_lr < 0.0f) {
        throw ConfigError("train: base_lr must be non-negative");
    }
    if (cfg.momentum < 0.0f || cfg.momentum >= 1.0f) {
        throw ConfigError("train: momentum must be in [0,1)");
    }
    if (cfg.backbone_lr_mult <= 0.0f) {
        throw ConfigError("train: backbone_lr_mult must be positive");
    }
    for (float s : cfg.normalize_std) {
        if (s == 0.0f) {
            throw ConfigError("train: normalize_std must be non-zero");
        }
    }
}

Tensor flip_horizontal(const Tensor& image) {
    if (image.rank() != 3 && image.rank() != 4) {
        throw std::invalid_argument("flip_horizontal: expected rank-3 or rank-4");
    }
    Tensor out(image.shape());
    const int w = image.extent(image.rank() - 1);
    const std::size_t rows = image.size() / static_cast<std::size_t>(w);
    const float* src = image.data();
    float* dst = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in_row = src + r * static_cast<std::size_t>(w);
        float* out_row = dst + r * static_cast<std::size_t>(w);
        for (int x = 0; x < w; ++x) {
            out_row[x] = in_row[w - 1 - x];
        }
    }
    return out;
}

Tensor normalize_image(const Tensor& image, const std::array<float, 3>& mean,
                       const std::array<float, 3>& stddev) {
    if (image.rank() != 3 || image.extent(0) != 3) {
        throw std::invalid_argument("normalize_image: expected (3, H, W)");
    }
    for (float s : stddev) {
        if (s == 0.0f) {
            throw std::invalid_argument("normalize_image: zero std");
        }
    }
    Tensor out(image.shape());
    const std::size_t plane = image.size() / 3;
    for (int c = 0; c < 3; ++c) {
        const float* src = image.data() + static_cast<std::size_t>(c) * plane;
        float* dst = out.data() + static_cast<std::size_t>(c) * plane;
        const float m = mean[static_cast<std::size_t>(c)];
        const float inv = 1.0f / stddev[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = (src[i] - m) * inv;
        }
    }
    return out;
}

Tensor augment(const Tensor& image, Rng& rng, const TrainConfig& cfg) {
    if (cfg.flip_augment && rng.next_float() < 0.5f) {
        return normalize_image(flip_horizontal(image), cfg.normalize_mean,
                               cfg.normalize_std);
    }
    return normalize_image(image, cfg.normalize_mean, cfg.normalize_std);
}

std::vector<int> build_labels(const std::vector<Sample>& samples) {
    std::map<int, int> classes;
    for (const Sample& s : samples) {
        classes.emplace(s.person_id, 0);
    }
    int next = 0;
    for (auto& [pid, cls] : classes) {
        cls = next++;
    }
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const Sample& s : samples) {
        labels.push_back(classes.at(s.person_id));
    }
    return labels;
}

int count_classes(const std::vector<Sample>& samples) {
    std::map<int, int> classes;
    for (const Sample& s : samples) {
        classes.emplace(s.person_id, 0);
    }
    return static_cast<int>(classes.size());
}

EpochRecord train_epoch(BackboneModel& model, PyramidHead& head,
                        const std::vector<Sample>& data, SgdMomentum& opt,
                        const TrainConfig& cfg, int epoch, const Rng& run_rng) {
    if (data.empty()) {
        throw DataError("train_epoch: empty dataset");
    }
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> labels = build_labels(data);
    for (int label : labels) {
        if (label >= head.cfg.num_classes) {
            throw std::invalid_argument("train_epoch: label exceeds classifier size");
        }
    }

    Rng shuffle_rng = run_rng.child("shuffle/" + std::to_string(epoch));
    Rng augment_rng = run_rng.child("augment/" + std::to_string(epoch));
    const std::vector<int> order = shuffled_indices(data.size(), shuffle_rng);

    std::vector<Parameter*> params = backbone_parameters(model);
    for (Parameter* p : params) {
        p->lr_mult = cfg.backbone_lr_mult;
    }
    for (Parameter* p : head_parameters(head)) {
        params.push_back(p);
    }

    const int bins = total_bins(head.cfg);
    std::vector<long> branch_hits(static_cast<std::size_t>(bins), 0);
    double loss_sum = 0.0;
    int batches = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end =
            std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
        std::vector<Tensor> images;
        std::vector<int> batch_labels;
        images.reserve(end - begin);
        batch_labels.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) {
            const Sample& s = data[static_cast<std::size_t>(order[k])];
            images.push_back(augment(s.image, augment_rng, cfg));
            batch_labels.push_back(labels[static_cast<std::size_t>(order[k])]);
        }
        const Tensor batch = batch_from(images);

        for (Parameter* p : params) {
            p->zero_grad();
        }
        BackboneTrace trace = backbone_forward_trace(model, batch);
        BinFeatures features = head_forward(head, trace.output);
        HpmLoss loss = hpm_loss(features.logits, batch_labels);
        if (!std::isfinite(loss.loss)) {
            throw NumericError("train_epoch: non-finite loss at epoch " +
                               std::to_string(epoch));
        }
        loss_sum += loss.loss;
        ++batches;

        for (int b = 0; b < bins; ++b) {
            const Tensor& logits = features.logits[static_cast<std::size_t>(b)];
            const int p = logits.extent(1);
            for (std::size_t i = 0; i < batch_labels.size(); ++i) {
                const float* row = logits.data() + i * static_cast<std::size_t>(p);
                int arg = 0;
                for (int c = 1; c < p; ++c) {
                    if (row[c] > row[arg]) {
                        arg = c;
                    }
                }
                if (arg == batch_labels[i]) {
                    ++branch_hits[static_cast<std::size_t>(b)];
                }
            }
        }

        Tensor grad_feature = head_backward(head, trace.output, features, loss.grad_logits);
        backbone_backward(model, trace, grad_feature);
        sgd_step(opt, params, epoch);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = static_cast<float>(loss_sum / std::max(1, batches));
    record.lr = opt.lr_at(epoch);
    record.branch_accuracy.reserve(static_cast<std::size_t>(bins));
    for (long hits : branch_hits) {
        record.branch_accuracy.push_back(static_cast<float>(hits) /
                                         static_cast<float>(data.size()));
    }
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

TrainLog train(BackboneModel& model, PyramidHead& head, const std::vector<Sample>& data,
               const TrainConfig& cfg) {
    validate_train_config(cfg);
    const Rng run_rng(cfg.seed);
    SgdMomentum opt(cfg.base_lr, cfg.momentum, cfg.decay_epoch);
    TrainLog log;
    log.records.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        log.records.push_back(train_epoch(model, head, data, opt, cfg, epoch, run_rng));
    }
    return log;
}

std::vector<float> evaluate_classification(const BackboneModel& model,
                                           const PyramidHead& head,
                                           const std::vector<Sample>& data,
                                           const TrainConfig& cfg) {
    if (data.empty()) {
        throw DataError("evaluate_classification: empty dataset");
    }
    const std::vector<int> labels = build_labels(data);
    const int bins = total_bins(head.cfg);
    std::vector<long> hits(static_cast<std::size_t>(bins), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor image =
            normalize_image(data[i].image, cfg.normalize_mean, cfg.normalize_std);
        const Tensor batch =
            image.reshaped(Shape{1, image.extent(0), image.extent(1), image.extent(2)});
        const Tensor feature = backbone_forward(model, batch);
        const BinFeatures features = head_forward(head, feature);
        for (int b = 0; b < bins; ++b) {
            const Tensor& logits = features.logits[static_cast<std::size_t>(b)];
            Tensor row(Shape{logits.extent(1)},
                       std::vector<float>(logits.data(), logits.data() + logits.size()));
            if (predict_bin(row) == labels[i]) {
                ++hits[static_cast<std::size_t>(b)];
            }
        }
    }
    std::vector<float> accuracy;
    accuracy.reserve(static_cast<std::size_t>(bins));
    for (long h : hits) {
        accuracy.push_back(static_cast<float>(h) / static_cast<float>(data.size()));
    }
    return accuracy;
}

void write_train_log(std::ostream& out, const TrainLog& log, const PyramidConfig& pyramid) {
    char buf[64];
    for (const EpochRecord& r : log.records) {
        out << "epoch=" << r.epoch;
        std::snprintf(buf, sizeof(buf), " loss=%.6f", r.mean_loss);
        out << buf;
        std::snprintf(buf, sizeof(buf), " lr=%.6g", r.lr);
        out << buf;
        std::size_t b = 0;
        for (std::size_t i = 0; i < pyramid.scales.size(); ++i) {
            for (int j = 0; j < pyramid.scales[i]; ++j, ++b) {
                std::snprintf(buf, sizeof(buf), " acc_%zu_%d=%.4f", i, j,
                              r.branch_accuracy[b]);
                out << buf;
            }
        }
        out << "\n";
    }
}

}  // namespace hpm
