#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hpm/backbone.hpp"
#include "hpm/dataio.hpp"
#include "hpm/hpp.hpp"
#include "hpm/trainer.hpp"

namespace hpm {

/// Flat key=value configuration covering every component. Unknown keys and
/// out-of-range values are rejected with the offending key named.
struct RunConfig {
    BackboneConfig backbone;
    PyramidConfig pyramid;
    TrainConfig train;
    SynthConfig synth;
    std::string data_dir = "data";
    std::string out_dir = "out";
    bool flip_sum = true;
    int topk = 20;
    int save_interval = 0;  // 0: checkpoint at the end only
};

/// Applies one key=value pair; throws ConfigError naming the key otherwise.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Line-oriented key=value text, '#' comments, blank lines ignored.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// Cross-field checks (geometry, schedule, synth bounds). Run after parsing.
void validate_run_config(const RunConfig& cfg);

}  // namespace hpm
