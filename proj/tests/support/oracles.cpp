#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracles {

std::vector<double> add(const std::vector<float>& a, const std::vector<float>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<double>(a[i]) + static_cast<double>(b[i]);
    }
    return out;
}

std::vector<double> matmul(const std::vector<float>& a, const std::vector<float>& b,
                           int m, int k, int n) {
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk) {
                acc += static_cast<double>(a[static_cast<std::size_t>(i) * k + kk]) *
                       static_cast<double>(b[static_cast<std::size_t>(kk) * n + j]);
            }
            out[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return out;
}

hpm::Tensor conv2d(const hpm::Tensor& x, const hpm::Tensor& weight,
                   const hpm::Tensor& bias, int stride, int padding) {
    const int n = x.extent(0);
    const int ci = x.extent(1);
    const int h = x.extent(2);
    const int w = x.extent(3);
    const int co = weight.extent(0);
    const int kh = weight.extent(2);
    const int kw = weight.extent(3);
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    hpm::Tensor out(hpm::Shape{n, co, oh, ow});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < co; ++c) {
            for (int y = 0; y < oh; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    double acc = bias.at(c);
                    for (int cc = 0; cc < ci; ++cc) {
                        for (int r = 0; r < kh; ++r) {
                            for (int s = 0; s < kw; ++s) {
                                const int iy = y * stride - padding + r;
                                const int ix = xo * stride - padding + s;
                                if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                                    acc += static_cast<double>(x.at(i, cc, iy, ix)) *
                                           static_cast<double>(weight.at(c, cc, r, s));
                                }
                            }
                        }
                    }
                    out.at(i, c, y, xo) = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

hpm::Tensor pool(const hpm::Tensor& bin, hpm::Pooling strategy) {
    const int n = bin.extent(0);
    const int c = bin.extent(1);
    const int h = bin.extent(2);
    const int w = bin.extent(3);
    hpm::Tensor out(hpm::Shape{n, c});
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            double sum = 0.0;
            double mx = -std::numeric_limits<double>::infinity();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double v = bin.at(i, ch, y, x);
                    sum += v;
                    mx = std::max(mx, v);
                }
            }
            const double avg = sum / (static_cast<double>(h) * w);
            double v = 0.0;
            switch (strategy) {
                case hpm::Pooling::avg: v = avg; break;
                case hpm::Pooling::max: v = mx; break;
                case hpm::Pooling::avg_plus_max: v = avg + mx; break;
            }
            out.at(i, ch) = static_cast<float>(v);
        }
    }
    return out;
}

double softmax_cross_entropy(const std::vector<float>& logits, int label) {
    double maxv = -std::numeric_limits<double>::infinity();
    for (float v : logits) {
        maxv = std::max(maxv, static_cast<double>(v));
    }
    double sum = 0.0;
    for (float v : logits) {
        sum += std::exp(static_cast<double>(v) - maxv);
    }
    return -(static_cast<double>(logits[static_cast<std::size_t>(label)]) - maxv -
             std::log(sum));
}

double hpm_loss(const std::vector<hpm::Tensor>& bin_logits,
                const std::vector<int>& labels) {
    double total = 0.0;
    for (const hpm::Tensor& logits : bin_logits) {
        const int n = logits.extent(0);
        const int p = logits.extent(1);
        for (int i = 0; i < n; ++i) {
            std::vector<float> row(logits.data() + static_cast<std::size_t>(i) * p,
                                   logits.data() + static_cast<std::size_t>(i + 1) * p);
            total += softmax_cross_entropy(row, labels[static_cast<std::size_t>(i)]);
        }
    }
    return total;
}

std::vector<double> distance_matrix(const std::vector<hpm::Descriptor>& queries,
                                    const std::vector<hpm::Descriptor>& gallery) {
    std::vector<double> out(queries.size() * gallery.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            double acc = 0.0;
            for (std::size_t i = 0; i < queries[q].values.size(); ++i) {
                const double d = static_cast<double>(queries[q].values[i]) -
                                 static_cast<double>(gallery[g].values[i]);
                acc += d * d;
            }
            out[q * gallery.size() + g] = acc;
        }
    }
    return out;
}

double average_precision(const std::vector<char>& ranked_relevance) {
    int total_relevant = 0;
    for (char c : ranked_relevance) {
        total_relevant += c ? 1 : 0;
    }
    if (total_relevant == 0) {
        throw std::invalid_argument("oracle ap: no relevant items");
    }
    double sum = 0.0;
    int seen = 0;
    for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
        if (ranked_relevance[k]) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(k + 1);
        }
    }
    return sum / total_relevant;
}

std::vector<double> cmc(const std::vector<std::vector<char>>& ranked_relevance, int K) {
    std::vector<double> out(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
        int hits = 0;
        for (const std::vector<char>& rel : ranked_relevance) {
            for (int r = 0; r <= k && r < static_cast<int>(rel.size()); ++r) {
                if (rel[static_cast<std::size_t>(r)]) {
                    ++hits;
                    break;
                }
            }
        }
        out[static_cast<std::size_t>(k)] =
            static_cast<double>(hits) / static_cast<double>(ranked_relevance.size());
    }
    return out;
}

EvalOracle evaluate(const std::vector<hpm::Descriptor>& queries,
                    const std::vector<hpm::Descriptor>& gallery, int K) {
    const std::vector<double> dist = oracles::distance_matrix(queries, gallery);
    EvalOracle out;
    std::vector<std::vector<char>> all_rel;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        // Junk rule: drop negative ids and same-id-same-camera items.
        std::vector<std::size_t> candidates;
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            const bool junk = gallery[g].person_id < 0 ||
                              (gallery[g].person_id == queries[q].person_id &&
                               gallery[g].camera_id == queries[q].camera_id);
            if (!junk) {
                candidates.push_back(g);
            }
        }
        bool has_match = false;
        for (std::size_t g : candidates) {
            if (gallery[g].person_id == queries[q].person_id) {
                has_match = true;
                break;
            }
        }
        if (!has_match) {
            continue;
        }
        std::sort(candidates.begin(), candidates.end(),
                  [&](std::size_t a, std::size_t b) {
                      const double da = dist[q * gallery.size() + a];
                      const double db = dist[q * gallery.size() + b];
                      if (da != db) {
                          return da < db;
                      }
                      return a < b;
                  });
        std::vector<char> rel;
        rel.reserve(candidates.size());
        for (std::size_t g : candidates) {
            rel.push_back(gallery[g].person_id == queries[q].person_id ? 1 : 0);
        }
        out.per_query_ap.push_back(average_precision(rel));
        all_rel.push_back(std::move(rel));
    }
    out.num_valid_queries = static_cast<int>(all_rel.size());
    if (out.num_valid_queries > 0) {
        out.cmc = cmc(all_rel, K);
        double sum = 0.0;
        for (double ap : out.per_query_ap) {
            sum += ap;
        }
        out.map = sum / out.num_valid_queries;
    }
    return out;
}

namespace {

// Double-precision activations in (N, C, H, W) layout.
struct RefMap {
    std::vector<double> v;
    int n = 0, c = 0, h = 0, w = 0;

    double& at(int i, int ch, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    double at(int i, int ch, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
};

RefMap ref_from(const hpm::Tensor& t) {
    RefMap m;
    m.n = t.extent(0);
    m.c = t.extent(1);
    m.h = t.rank() > 2 ? t.extent(2) : 1;
    m.w = t.rank() > 3 ? t.extent(3) : 1;
    m.v.assign(t.data(), t.data() + t.size());
    return m;
}

RefMap ref_conv(const RefMap& x, const hpm::Conv2dLayer& layer) {
    const int co = layer.out_channels();
    const int kh = layer.kernel_h();
    const int kw = layer.kernel_w();
    const int stride = layer.stride;
    const int pad = layer.padding;
    RefMap out;
    out.n = x.n;
    out.c = co;
    out.h = (x.h + 2 * pad - kh) / stride + 1;
    out.w = (x.w + 2 * pad - kw) / stride + 1;
    out.v.assign(static_cast<std::size_t>(out.n) * co * out.h * out.w, 0.0);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < co; ++c) {
            for (int y = 0; y < out.h; ++y) {
                for (int xo = 0; xo < out.w; ++xo) {
                    double acc = static_cast<double>(layer.bias.value.at(c));
                    for (int cc = 0; cc < x.c; ++cc) {
                        for (int r = 0; r < kh; ++r) {
                            for (int s = 0; s < kw; ++s) {
                                const int iy = y * stride - pad + r;
                                const int ix = xo * stride - pad + s;
                                if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
                                    acc += x.at(i, cc, iy, ix) *
                                           static_cast<double>(
                                               layer.weight.value.at(c, cc, r, s));
                                }
                            }
                        }
                    }
                    out.at(i, c, y, xo) = acc;
                }
            }
        }
    }
    return out;
}

void ref_relu_inplace(RefMap& x) {
    for (double& v : x.v) {
        v = v > 0.0 ? v : 0.0;
    }
}

double ref_dot(const RefMap& x, const std::vector<float>& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        acc += x.v[i] * static_cast<double>(weights[i]);
    }
    return acc;
}

RefMap ref_backbone(const hpm::BackboneModel& model, const hpm::Tensor& images) {
    RefMap x = ref_from(images);
    for (const hpm::Conv2dLayer& layer : model.layers) {
        x = ref_conv(x, layer);
        ref_relu_inplace(x);
    }
    return x;
}

double ref_head_loss_on(const hpm::PyramidHead& head, const RefMap& feature,
                        const std::vector<int>& labels) {
    double total = 0.0;
    int b = 0;
    for (int scale : head.cfg.scales) {
        const int bh = feature.h / scale;
        for (int j = 0; j < scale; ++j, ++b) {
            for (int i = 0; i < feature.n; ++i) {
                // Pool bin j, reduce, classify, cross entropy, all in double.
                std::vector<double> pooled(static_cast<std::size_t>(feature.c));
                for (int ch = 0; ch < feature.c; ++ch) {
                    double sum = 0.0;
                    double mx = -std::numeric_limits<double>::infinity();
                    for (int y = j * bh; y < (j + 1) * bh; ++y) {
                        for (int x = 0; x < feature.w; ++x) {
                            const double v = feature.at(i, ch, y, x);
                            sum += v;
                            mx = std::max(mx, v);
                        }
                    }
                    const double avg = sum / (static_cast<double>(bh) * feature.w);
                    switch (head.cfg.pooling) {
                        case hpm::Pooling::avg: pooled[ch] = avg; break;
                        case hpm::Pooling::max: pooled[ch] = mx; break;
                        case hpm::Pooling::avg_plus_max: pooled[ch] = avg + mx; break;
                    }
                }
                const hpm::Conv2dLayer& red = head.reduce[static_cast<std::size_t>(b)];
                std::vector<double> reduced(static_cast<std::size_t>(head.cfg.reduced_dim));
                for (int d = 0; d < head.cfg.reduced_dim; ++d) {
                    double acc = static_cast<double>(red.bias.value.at(d));
                    for (int ch = 0; ch < feature.c; ++ch) {
                        acc += pooled[static_cast<std::size_t>(ch)] *
                               static_cast<double>(red.weight.value.at(d, ch, 0, 0));
                    }
                    reduced[static_cast<std::size_t>(d)] = acc;
                }
                const hpm::LinearLayer& fc = head.fc[static_cast<std::size_t>(b)];
                std::vector<double> logits(static_cast<std::size_t>(head.cfg.num_classes));
                for (int cls = 0; cls < head.cfg.num_classes; ++cls) {
                    double acc = 0.0;
                    for (int d = 0; d < head.cfg.reduced_dim; ++d) {
                        acc += static_cast<double>(fc.weight.value.at(cls, d)) *
                               reduced[static_cast<std::size_t>(d)];
                    }
                    logits[static_cast<std::size_t>(cls)] = acc;
                }
                double maxv = logits[0];
                for (double v : logits) {
                    maxv = std::max(maxv, v);
                }
                double sum = 0.0;
                for (double v : logits) {
                    sum += std::exp(v - maxv);
                }
                total -= logits[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] -
                         maxv - std::log(sum);
            }
        }
    }
    return total;
}

}  // namespace

double ref_conv2d_objective(const hpm::Conv2dLayer& layer, const hpm::Tensor& x,
                            const std::vector<float>& weights) {
    return ref_dot(ref_conv(ref_from(x), layer), weights);
}

double ref_relu_objective(const hpm::Tensor& x, const std::vector<float>& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x.data()[i]);
        acc += (v > 0.0 ? v : 0.0) * static_cast<double>(weights[i]);
    }
    return acc;
}

double ref_backbone_objective(const hpm::BackboneModel& model, const hpm::Tensor& images,
                              const std::vector<float>& weights) {
    return ref_dot(ref_backbone(model, images), weights);
}

double ref_head_loss(const hpm::PyramidHead& head, const hpm::Tensor& feature,
                     const std::vector<int>& labels) {
    return ref_head_loss_on(head, ref_from(feature), labels);
}

double ref_composite_loss(const hpm::BackboneModel& model, const hpm::PyramidHead& head,
                          const hpm::Tensor& images, const std::vector<int>& labels) {
    return ref_head_loss_on(head, ref_backbone(model, images), labels);
}

double central_difference(float* x, double step, const std::function<double()>& f) {
    const float saved = *x;
    const float up_x = static_cast<float>(static_cast<double>(saved) + step);
    const float down_x = static_cast<float>(static_cast<double>(saved) - step);
    *x = up_x;
    const double up = f();
    *x = down_x;
    const double down = f();
    *x = saved;
    return (up - down) /
           (static_cast<double>(up_x) - static_cast<double>(down_x));
}

bool gradient_close(double analytic, double numeric, double rel, double floor) {
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return diff <= std::max(rel * scale, floor);
}

}  // namespace oracles
