#include "hpm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "hpm/errors.hpp"

namespace hpm {
namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value +
                          "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                          value + "'");
    }
    return out;
}

float parse_float(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const float out = std::stof(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value +
                          "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<int> parse_int_csv(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_int(key, trim(item)));
    }
    if (out.empty()) {
        throw ConfigError("config key '" + key + "': expected a comma-separated list");
    }
    return out;
}

std::array<float, 3> parse_float3(const std::string& key, const std::string& value) {
    std::array<float, 3> out{};
    std::stringstream ss(value);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 3) {
            throw ConfigError("config key '" + key + "': expected exactly 3 values");
        }
        out[i++] = parse_float(key, trim(item));
    }
    if (i != 3) {
        throw ConfigError("config key '" + key + "': expected exactly 3 values");
    }
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "input_height") {
        cfg.backbone.input_height = parse_int(key, value);
        cfg.synth.height = cfg.backbone.input_height;
    } else if (key == "input_width") {
        cfg.backbone.input_width = parse_int(key, value);
        cfg.synth.width = cfg.backbone.input_width;
    } else if (key == "in_channels") {
        cfg.backbone.in_channels = parse_int(key, value);
    } else if (key == "stage_channels") {
        const auto v = parse_int_csv(key, value);
        if (v.size() != 4) {
            throw ConfigError("config key 'stage_channels': expected 4 values");
        }
        std::copy(v.begin(), v.end(), cfg.backbone.stage_channels.begin());
    } else if (key == "scales") {
        cfg.pyramid.scales = parse_int_csv(key, value);
    } else if (key == "reduced_dim") {
        cfg.pyramid.reduced_dim = parse_int(key, value);
    } else if (key == "pooling") {
        try {
            cfg.pyramid.pooling = pooling_from_string(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config key 'pooling': " + std::string(e.what()));
        }
    } else if (key == "num_classes") {
        cfg.pyramid.num_classes = parse_int(key, value);
    } else if (key == "batch_size") {
        cfg.train.batch_size = parse_int(key, value);
    } else if (key == "epochs") {
        cfg.train.epochs = parse_int(key, value);
    } else if (key == "base_lr") {
        cfg.train.base_lr = parse_float(key, value);
    } else if (key == "decay_epoch") {
        cfg.train.decay_epoch = parse_int(key, value);
    } else if (key == "momentum") {
        cfg.train.momentum = parse_float(key, value);
    } else if (key == "backbone_lr_mult") {
        cfg.train.backbone_lr_mult = parse_float(key, value);
    } else if (key == "seed") {
        cfg.train.seed = parse_u64(key, value);
        cfg.synth.seed = cfg.train.seed;
    } else if (key == "flip_augment") {
        cfg.train.flip_augment = parse_bool(key, value);
    } else if (key == "normalize_mean") {
        cfg.train.normalize_mean = parse_float3(key, value);
    } else if (key == "normalize_std") {
        cfg.train.normalize_std = parse_float3(key, value);
    } else if (key == "num_ids") {
        cfg.synth.num_ids = parse_int(key, value);
    } else if (key == "images_per_id_per_cam") {
        cfg.synth.images_per_id_per_cam = parse_int(key, value);
    } else if (key == "num_cams") {
        cfg.synth.num_cams = parse_int(key, value);
    } else if (key == "band_count") {
        cfg.synth.band_count = parse_int(key, value);
    } else if (key == "misalignment_max") {
        cfg.synth.misalignment_max = parse_int(key, value);
    } else if (key == "noise_std") {
        cfg.synth.noise_std = parse_float(key, value);
    } else if (key == "synth_seed") {
        cfg.synth.seed = parse_u64(key, value);
    } else if (key == "disjoint_train_ids") {
        cfg.synth.disjoint_train_ids = parse_bool(key, value);
    } else if (key == "data_dir") {
        cfg.data_dir = value;
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "flip_sum") {
        cfg.flip_sum = parse_bool(key, value);
    } else if (key == "topk") {
        cfg.topk = parse_int(key, value);
    } else if (key == "save_interval") {
        cfg.save_interval = parse_int(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        }
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate_run_config(cfg);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path.string());
    }
    return parse_run_config(in);
}

void validate_run_config(const RunConfig& cfg) {
    validate_backbone_geometry(cfg.backbone);
    validate_train_config(cfg.train);
    validate_synth_config(cfg.synth);
    if (cfg.pyramid.reduced_dim < 1) {
        throw ConfigError("config key 'reduced_dim': must be positive");
    }
    int prev = 0;
    for (int s : cfg.pyramid.scales) {
        if (s <= prev) {
            throw ConfigError("config key 'scales': must be strictly increasing");
        }
        prev = s;
    }
    const int feature_h = cfg.backbone.input_height / 16;
    for (int s : cfg.pyramid.scales) {
        if (feature_h % s != 0) {
            throw ConfigError("config key 'scales': scale " + std::to_string(s) +
                              " does not divide feature height " +
                              std::to_string(feature_h));
        }
    }
    if (cfg.pyramid.num_classes < 0) {
        throw ConfigError("config key 'num_classes': must be >= 0 (0 = derive from data)");
    }
    if (cfg.topk < 1) {
        throw ConfigError("config key 'topk': must be >= 1");
    }
    if (cfg.save_interval < 0) {
        throw ConfigError("config key 'save_interval': must be >= 0");
    }
}

}  // namespace hpm
