#include "hpm/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hpm/errors.hpp"
#include "hpm/serialize.hpp"
#include "hpm/trainer.hpp"

namespace hpm {
namespace {

std::vector<float> forward_concat(const BackboneModel& model, const PyramidHead& head,
                                  const Tensor& batch) {
    const Tensor feature = backbone_forward(model, batch);
    const BinFeatures features = head_forward(head, feature);
    std::vector<float> out;
    out.reserve(features.reduced.size() * static_cast<std::size_t>(head.cfg.reduced_dim));
    for (const Tensor& reduced : features.reduced) {
        out.insert(out.end(), reduced.data(), reduced.data() + reduced.size());
    }
    return out;
}

}  // namespace

std::vector<float> extract_descriptor(const BackboneModel& model, const PyramidHead& head,
                                      const Tensor& image, bool flip_sum) {
    if (image.rank() != 3) {
        throw std::invalid_argument("extract_descriptor: image must be (C, H, W)");
    }
    const Tensor batch =
        image.reshaped(Shape{1, image.extent(0), image.extent(1), image.extent(2)});
    std::vector<float> vec = forward_concat(model, head, batch);
    if (flip_sum) {
        const Tensor flipped = flip_horizontal(image).reshaped(batch.shape());
        const std::vector<float> other = forward_concat(model, head, flipped);
        for (std::size_t i = 0; i < vec.size(); ++i) {
            vec[i] += other[i];
        }
    }
    return vec;
}

std::vector<float> normalize(std::vector<float> v) {
    double sq = 0.0;
    for (float x : v) {
        sq += static_cast<double>(x) * static_cast<double>(x);
    }
    const double norm = std::sqrt(sq);
    if (norm <= 1e-12) {
        throw std::invalid_argument("normalize: vector norm is too small");
    }
    const float inv = static_cast<float>(1.0 / norm);
    for (float& x : v) {
        x *= inv;
    }
    return v;
}

Tensor distance_matrix(const std::vector<Descriptor>& queries,
                       const std::vector<Descriptor>& gallery) {
    if (queries.empty() || gallery.empty()) {
        throw std::invalid_argument("distance_matrix: empty descriptor set");
    }
    const std::size_t dim = queries.front().values.size();
    for (const Descriptor& d : queries) {
        if (d.values.size() != dim) {
            throw std::invalid_argument("distance_matrix: query dimension mismatch");
        }
    }
    for (const Descriptor& d : gallery) {
        if (d.values.size() != dim) {
            throw std::invalid_argument("distance_matrix: gallery dimension mismatch");
        }
    }
    Tensor out(Shape{static_cast<int>(queries.size()), static_cast<int>(gallery.size())});
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const float* qv = queries[q].values.data();
        float* row = out.data() + q * gallery.size();
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            const float* gv = gallery[g].values.data();
            float acc = 0.0f;
            for (std::size_t i = 0; i < dim; ++i) {
                const float d = qv[i] - gv[i];
                acc += d * d;
            }
            row[g] = acc;
        }
    }
    return out;
}

std::vector<int> rank(std::span<const float> distances, std::span<const char> valid) {
    if (distances.size() != valid.size()) {
        throw std::invalid_argument("rank: mask length mismatch");
    }
    std::vector<int> order;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        if (valid[i]) {
            order.push_back(static_cast<int>(i));
        }
    }
    if (order.empty()) {
        throw std::invalid_argument("rank: no valid gallery items");
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return distances[static_cast<std::size_t>(a)] <
               distances[static_cast<std::size_t>(b)];
    });
    return order;
}

Tensor heatmap(const Tensor& feature) {
    if (feature.rank() != 3) {
        throw std::invalid_argument("heatmap: feature must be (C, H, W)");
    }
    const int c = feature.extent(0);
    const int h = feature.extent(1);
    const int w = feature.extent(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out(Shape{h, w});
    float* acc = out.data();
    for (int ch = 0; ch < c; ++ch) {
        const float* src = feature.data() + static_cast<std::size_t>(ch) * plane;
        float lo = std::numeric_limits<float>::infinity();
        float hi = -std::numeric_limits<float>::infinity();
        for (std::size_t i = 0; i < plane; ++i) {
            lo = std::min(lo, src[i]);
            hi = std::max(hi, src[i]);
        }
        if (hi > lo) {
            const float inv = 1.0f / (hi - lo);
            for (std::size_t i = 0; i < plane; ++i) {
                acc[i] += (src[i] - lo) * inv;
            }
        }
    }
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < plane; ++i) {
        lo = std::min(lo, acc[i]);
        hi = std::max(hi, acc[i]);
    }
    if (hi > lo) {
        const float inv = 1.0f / (hi - lo);
        for (std::size_t i = 0; i < plane; ++i) {
            acc[i] = (acc[i] - lo) * inv;
        }
    } else {
        std::fill(acc, acc + plane, 0.0f);
    }
    return out;
}

void save_descriptors(const std::filesystem::path& path,
                      const std::vector<Descriptor>& descriptors) {
    if (descriptors.empty()) {
        throw std::invalid_argument("save_descriptors: empty set");
    }
    const int dim = static_cast<int>(descriptors.front().values.size());
    Tensor matrix(Shape{static_cast<int>(descriptors.size()), dim});
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (static_cast<int>(descriptors[i].values.size()) != dim) {
            throw std::invalid_argument("save_descriptors: inconsistent dimensions");
        }
        std::copy(descriptors[i].values.begin(), descriptors[i].values.end(),
                  matrix.data() + i * static_cast<std::size_t>(dim));
    }
    save_tensor_file(path, matrix);
    std::ofstream labels(path.string() + ".labels");
    if (!labels) {
        throw DataError("cannot write label sidecar for " + path.string());
    }
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        labels << i << " " << descriptors[i].person_id << " " << descriptors[i].camera_id
               << " " << (descriptors[i].is_query ? 1 : 0) << "\n";
    }
}

std::vector<Descriptor> load_descriptors(const std::filesystem::path& path) {
    const Tensor matrix = load_tensor_file(path);
    if (matrix.rank() != 2) {
        throw DataError("descriptor file must hold a rank-2 matrix: " + path.string());
    }
    const auto rows = static_cast<std::size_t>(matrix.extent(0));
    const auto dim = static_cast<std::size_t>(matrix.extent(1));
    std::ifstream labels(path.string() + ".labels");
    if (!labels) {
        throw DataError("missing label sidecar: " + path.string() + ".labels");
    }
    std::vector<Descriptor> out(rows);
    std::string line;
    std::size_t seen = 0;
    while (std::getline(labels, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream is(line);
        std::size_t index = 0;
        int pid = 0;
        int cam = 0;
        int is_query = 0;
        if (!(is >> index >> pid >> cam >> is_query) || index >= rows) {
            throw DataError("malformed label line: " + line);
        }
        Descriptor& d = out[index];
        d.values.assign(matrix.data() + index * dim, matrix.data() + (index + 1) * dim);
        d.person_id = pid;
        d.camera_id = cam;
        d.is_query = is_query != 0;
        ++seen;
    }
    if (seen != rows) {
        throw DataError("label sidecar does not cover every descriptor row: " +
                        path.string());
    }
    return out;
}

}  // namespace hpm
