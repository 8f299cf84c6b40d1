#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "hpm/backbone.hpp"
#include "hpm/hpp.hpp"

namespace hpm {

/// L2-normalized retrieval vector with its labels. Length is
/// reduced_dim * total_bins.
struct Descriptor {
    std::vector<float> values;
    int person_id = 0;
    int camera_id = 1;
    bool is_query = false;
};

/// Concatenation of the reduced bin vectors in scale-major, bin-minor order
/// for one already-normalized (3, H, W) image. With flip_sum the flipped
/// image's vector is added before any normalization.
std::vector<float> extract_descriptor(const BackboneModel& model, const PyramidHead& head,
                                      const Tensor& image, bool flip_sum);

/// v / ||v||2; rejects near-zero vectors.
std::vector<float> normalize(std::vector<float> v);

/// Squared Euclidean distances, queries x gallery.
Tensor distance_matrix(const std::vector<Descriptor>& queries,
                       const std::vector<Descriptor>& gallery);

/// Valid gallery indices by ascending distance; ties by ascending index.
std::vector<int> rank(std::span<const float> distances, std::span<const char> valid);

/// Min-max normalizes each channel of a (C, H, W) map to [0,1] (constant
/// channels become 0), sums over channels, rescales to [0,1].
Tensor heatmap(const Tensor& feature);

/// Tensor container holding the descriptor matrix plus a ".labels" sidecar of
/// "index pid cam is_query" lines.
void save_descriptors(const std::filesystem::path& path,
                      const std::vector<Descriptor>& descriptors);
std::vector<Descriptor> load_descriptors(const std::filesystem::path& path);

}  // namespace hpm
