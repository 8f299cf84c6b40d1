#include "hpm/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "hpm/errors.hpp"

namespace hpm {
namespace {

namespace fs = std::filesystem;

// Spread per-camera brightness offsets over roughly +-0.12 so cross-camera
// matching has to rely on more than raw color statistics.
constexpr float kCameraBrightnessSpan = 0.24f;

float clamp01(float v) {
    return std::min(1.0f, std::max(0.0f, v));
}

int read_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comment lines, PNM style.
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) {
        throw DataError("pnm: malformed header");
    }
    return value;
}

unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::lround(clamp01(v) * 255.0f));
}

}  // namespace

std::string split_to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::query: return "query";
        case Split::gallery: return "gallery";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "query") return Split::query;
    if (s == "gallery") return Split::gallery;
    throw ConfigError("unknown split: " + s);
}

void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.num_ids < 1 || cfg.images_per_id_per_cam < 1 || cfg.num_cams < 1) {
        throw ConfigError("synthetic: counts must be positive");
    }
    if (cfg.band_count < 2) {
        throw ConfigError("synthetic: band_count must be >= 2");
    }
    if (cfg.misalignment_max < 0 || cfg.misalignment_max >= cfg.height / 4) {
        throw ConfigError("synthetic: misalignment_max must be in [0, height/4)");
    }
    if (cfg.noise_std < 0.0f) {
        throw ConfigError("synthetic: noise_std must be >= 0");
    }
    if (cfg.height < cfg.band_count || cfg.width < 1) {
        throw ConfigError("synthetic: image extents too small");
    }
}

std::pair<int, int> parse_market_filename(const std::string& name) {
    const auto underscore = name.find('_');
    if (underscore == std::string::npos || underscore == 0) {
        throw DataError("market filename: missing '_' separator in " + name);
    }
    const std::string pid_token = name.substr(0, underscore);
    int pid = 0;
    if (pid_token == "-1") {
        pid = -1;
    } else {
        if (pid_token.size() < 4 ||
            !std::all_of(pid_token.begin(), pid_token.end(),
                         [](unsigned char c) { return std::isdigit(c); })) {
            throw DataError("market filename: bad person id in " + name);
        }
        pid = std::stoi(pid_token);
    }
    std::size_t pos = underscore + 1;
    if (pos >= name.size() || name[pos] != 'c') {
        throw DataError("market filename: missing camera tag in " + name);
    }
    ++pos;
    std::size_t end = pos;
    while (end < name.size() && std::isdigit(static_cast<unsigned char>(name[end]))) {
        ++end;
    }
    if (end == pos) {
        throw DataError("market filename: bad camera id in " + name);
    }
    const int cam = std::stoi(name.substr(pos, end - pos));
    if (cam < 1) {
        throw DataError("market filename: camera id must be positive in " + name);
    }
    return {pid, cam};
}

std::string format_market_filename(int person_id, int camera_id, int sequence) {
    char buf[64];
    if (person_id < 0) {
        std::snprintf(buf, sizeof(buf), "-1_c%ds1_%06d_00.ppm", camera_id, sequence);
    } else {
        std::snprintf(buf, sizeof(buf), "%04d_c%ds1_%06d_00.ppm", person_id, camera_id,
                      sequence);
    }
    return buf;
}

Tensor load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open: " + path.string());
    }
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') {
        throw DataError("ppm: bad magic in " + path.string());
    }
    const int w = read_pnm_int(in);
    const int h = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (w < 1 || h < 1) {
        throw DataError("ppm: bad extents in " + path.string());
    }
    if (maxval != 255) {
        throw DataError("ppm: only maxval 255 is supported, got " +
                        std::to_string(maxval));
    }
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) {
        throw DataError("ppm: truncated pixel data in " + path.string());
    }
    Tensor image(Shape{3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(c, y, x) =
                    static_cast<float>(raw[(static_cast<std::size_t>(y) * w + x) * 3 +
                                           static_cast<std::size_t>(c)]) /
                    255.0f;
            }
        }
    }
    return image;
}

void save_ppm(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.extent(0) != 3) {
        throw std::invalid_argument("save_ppm: image must be (3, H, W)");
    }
    const int h = image.extent(1);
    const int w = image.extent(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] =
                    to_byte(image.at(c, y, x));
            }
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw DataError("ppm: write failed for " + path.string());
    }
}

void save_pgm(const std::filesystem::path& path, const Tensor& map) {
    if (map.rank() != 2) {
        throw std::invalid_argument("save_pgm: map must be rank-2 (H, W)");
    }
    const int h = map.extent(0);
    const int w = map.extent(1);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            raw[static_cast<std::size_t>(y) * w + x] = to_byte(map.at(y, x));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw DataError("pgm: write failed for " + path.string());
    }
}

Tensor resize_nearest(const Tensor& image, int out_h, int out_w) {
    if (image.rank() != 3) {
        throw std::invalid_argument("resize_nearest: image must be rank-3");
    }
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("resize_nearest: target extents must be positive");
    }
    const int c = image.extent(0);
    const int h = image.extent(1);
    const int w = image.extent(2);
    if (h == out_h && w == out_w) {
        return image;
    }
    Tensor out(Shape{c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = std::min(h - 1, y * h / out_h);
            for (int x = 0; x < out_w; ++x) {
                const int sx = std::min(w - 1, x * w / out_w);
                out.at(ch, y, x) = image.at(ch, sy, sx);
            }
        }
    }
    return out;
}

std::vector<Sample> generate_synthetic(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    Rng master(cfg.seed);

    // One palette of band colors per dataset; each identity arranges it in its
    // own band order plus a small per-band jitter. Identity therefore lives in
    // where the colors sit, not in which colors occur, so whole-image pooling
    // aliases identities that horizontal slicing keeps apart.
    Rng palette_rng = master.child("palette");
    std::vector<float> palette(static_cast<std::size_t>(cfg.band_count) * 3);
    for (float& v : palette) {
        v = palette_rng.next_uniform(0.1f, 0.9f);
    }

    std::vector<std::vector<int>> orders;
    std::vector<std::vector<float>> signatures;
    signatures.reserve(static_cast<std::size_t>(cfg.num_ids));
    for (int id = 0; id < cfg.num_ids; ++id) {
        Rng rng = master.child("id/" + std::to_string(id));
        std::vector<int> order(static_cast<std::size_t>(cfg.band_count));
        for (int attempt = 0; attempt < 20; ++attempt) {
            for (int b = 0; b < cfg.band_count; ++b) {
                order[static_cast<std::size_t>(b)] = b;
            }
            for (int b = cfg.band_count; b > 1; --b) {
                std::swap(order[static_cast<std::size_t>(b - 1)],
                          order[static_cast<std::size_t>(rng.next_int(0, b - 1))]);
            }
            if (std::find(orders.begin(), orders.end(), order) == orders.end()) {
                break;  // distinct arrangement found
            }
        }
        orders.push_back(order);
        std::vector<float> sig(static_cast<std::size_t>(cfg.band_count) * 3);
        for (int b = 0; b < cfg.band_count; ++b) {
            for (int c = 0; c < 3; ++c) {
                sig[static_cast<std::size_t>(b) * 3 + static_cast<std::size_t>(c)] =
                    palette[static_cast<std::size_t>(order[static_cast<std::size_t>(b)]) * 3 +
                            static_cast<std::size_t>(c)] +
                    rng.next_uniform(-0.03f, 0.03f);
            }
        }
        signatures.push_back(std::move(sig));
    }

    const int band_h = cfg.height / cfg.band_count;
    const int eval_ids_from = cfg.disjoint_train_ids ? cfg.num_ids / 2 : 0;
    const int train_imgs = (cfg.images_per_id_per_cam + 1) / 2;

    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.num_ids) * cfg.num_cams *
                    cfg.images_per_id_per_cam);
    for (int id = 0; id < cfg.num_ids; ++id) {
        const std::vector<float>& sig = signatures[static_cast<std::size_t>(id)];
        for (int cam = 1; cam <= cfg.num_cams; ++cam) {
            const float brightness =
                cfg.num_cams > 1 ? kCameraBrightnessSpan *
                                       (static_cast<float>(cam - 1) /
                                            static_cast<float>(cfg.num_cams - 1) -
                                        0.5f)
                                 : 0.0f;
            for (int k = 0; k < cfg.images_per_id_per_cam; ++k) {
                Rng rng = master.child("img/" + std::to_string(id) + "/" +
                                       std::to_string(cam) + "/" + std::to_string(k));
                const int shift =
                    cfg.misalignment_max > 0
                        ? rng.next_int(-cfg.misalignment_max, cfg.misalignment_max)
                        : 0;
                Sample sample;
                sample.image = Tensor(Shape{3, cfg.height, cfg.width});
                for (int y = 0; y < cfg.height; ++y) {
                    const int src_row =
                        std::min(cfg.height - 1, std::max(0, y + shift));
                    const int band = std::min(cfg.band_count - 1, src_row / band_h);
                    for (int x = 0; x < cfg.width; ++x) {
                        for (int c = 0; c < 3; ++c) {
                            float v = sig[static_cast<std::size_t>(band) * 3 +
                                          static_cast<std::size_t>(c)] +
                                      brightness;
                            if (cfg.noise_std > 0.0f) {
                                v += rng.next_gaussian(0.0f, cfg.noise_std);
                            }
                            sample.image.at(c, y, x) = clamp01(v);
                        }
                    }
                }
                sample.person_id = id + 1;
                sample.camera_id = cam;
                if (cfg.disjoint_train_ids) {
                    sample.split = id < eval_ids_from
                                       ? Split::train
                                       : (cam == 1 ? Split::query : Split::gallery);
                } else {
                    sample.split = k < train_imgs
                                       ? Split::train
                                       : (cam == 1 ? Split::query : Split::gallery);
                }
                samples.push_back(std::move(sample));
            }
        }
    }
    return samples;
}

void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples) {
    std::error_code ec;
    for (const char* sub : {"train", "query", "gallery"}) {
        fs::create_directories(root / sub, ec);
        if (ec) {
            throw DataError("cannot create dataset directory under " + root.string());
        }
    }
    std::ofstream manifest(root / "manifest.txt");
    if (!manifest) {
        throw DataError("cannot write manifest under " + root.string());
    }
    int seq = 0;
    for (const Sample& s : samples) {
        const std::string name = format_market_filename(s.person_id, s.camera_id, seq++);
        save_ppm(root / split_to_string(s.split) / name, s.image);
        manifest << split_to_string(s.split) << "/" << name << " " << s.person_id << " "
                 << s.camera_id << "\n";
    }
}

std::vector<Sample> load_dataset(const std::filesystem::path& root, int target_h,
                                 int target_w) {
    if (!fs::exists(root)) {
        throw DataError("dataset root does not exist: " + root.string());
    }
    std::vector<Sample> samples;
    for (Split split : {Split::train, Split::query, Split::gallery}) {
        const fs::path dir = root / split_to_string(split);
        if (!fs::exists(dir)) {
            continue;
        }
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) {
            const auto [pid, cam] = parse_market_filename(file.filename().string());
            Sample sample;
            sample.image = resize_nearest(load_ppm(file), target_h, target_w);
            sample.person_id = pid;
            sample.camera_id = cam;
            sample.split = split;
            samples.push_back(std::move(sample));
        }
    }
    if (samples.empty()) {
        throw DataError("dataset is empty: " + root.string());
    }
    return samples;
}

std::vector<Sample> filter_split(const std::vector<Sample>& samples, Split split) {
    std::vector<Sample> out;
    for (const Sample& s : samples) {
        if (s.split == split) {
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace hpm
