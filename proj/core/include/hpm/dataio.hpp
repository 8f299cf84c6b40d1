#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hpm/tensor.hpp"

namespace hpm {

enum class Split { train, query, gallery };

std::string split_to_string(Split s);
Split split_from_string(const std::string& s);

/// One labeled image. person_id >= 0 identifies a person, -1 marks a junk /
/// distractor image. Pixels stay in [0, 1] until normalization.
struct Sample {
    Tensor image;  // (3, H, W)
    int person_id = 0;
    int camera_id = 1;
    Split split = Split::train;
};

/// Striped-person generator: identity lives in horizontal band colors, each
/// render gets a vertical shift, pixel noise and a camera brightness offset.
struct SynthConfig {
    int num_ids = 16;
    int images_per_id_per_cam = 10;
    int num_cams = 3;
    int band_count = 8;
    int misalignment_max = 4;
    float noise_std = 0.05f;
    std::uint64_t seed = 7;
    int height = 128;
    int width = 64;
    bool disjoint_train_ids = false;
};

void validate_synth_config(const SynthConfig& cfg);

/// Parses "{pid}_c{cam}..." Market-style names; pid is 4+ digits or "-1".
std::pair<int, int> parse_market_filename(const std::string& name);

/// Inverse-compatible Market-style name, e.g. "0002_c1s1_000451_00.ppm".
std::string format_market_filename(int person_id, int camera_id, int sequence);

/// Binary P6, maxval 255 only. Values scaled to [0, 1].
Tensor load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Tensor& image);

/// P5 writer for heatmaps; expects values in [0, 1].
void save_pgm(const std::filesystem::path& path, const Tensor& map);

/// Nearest-neighbor resize of a (3, H, W) image.
Tensor resize_nearest(const Tensor& image, int out_h, int out_w);

std::vector<Sample> generate_synthetic(const SynthConfig& cfg);

/// Materializes root/{train,query,gallery}/ with Market-style filenames plus
/// a manifest.txt of "filename pid cam" lines.
void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples);

/// Loads every .ppm under root/{train,query,gallery}/, resized to the given
/// input extents.
std::vector<Sample> load_dataset(const std::filesystem::path& root, int target_h,
                                 int target_w);

std::vector<Sample> filter_split(const std::vector<Sample>& samples, Split split);

}  // namespace hpm
