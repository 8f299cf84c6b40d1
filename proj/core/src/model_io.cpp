#include "hpm/model_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hpm/errors.hpp"
#include "hpm/serialize.hpp"

namespace hpm {
namespace {

constexpr char kCheckpointMagic[] = "HPMCKPT1";

std::string csv(const std::array<int, 4>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string csv(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_csv(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stoi(item));
    }
    return out;
}

std::string expect_line(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("checkpoint: truncated while reading " + what);
    }
    return line;
}

std::string expect_field(std::istream& in, const std::string& key) {
    const std::string line = expect_line(in, key);
    const std::string prefix = key + "=";
    if (line.rfind(prefix, 0) != 0) {
        throw DataError("checkpoint: expected '" + key + "=', got '" + line + "'");
    }
    return line.substr(prefix.size());
}

std::vector<const Parameter*> ordered_parameters(const BackboneModel& model,
                                                 const PyramidHead& head) {
    std::vector<const Parameter*> params;
    for (const Conv2dLayer& layer : model.layers) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    for (const Conv2dLayer& layer : head.reduce) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    for (const LinearLayer& layer : head.fc) {
        params.push_back(&layer.weight);
    }
    return params;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const BackboneModel& model,
                     const PyramidHead& head) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open checkpoint for writing: " + path.string());
    }
    out << kCheckpointMagic << "\n";
    out << "input_height=" << model.cfg.input_height << "\n";
    out << "input_width=" << model.cfg.input_width << "\n";
    out << "in_channels=" << model.cfg.in_channels << "\n";
    out << "stage_channels=" << csv(model.cfg.stage_channels) << "\n";
    out << "scales=" << csv(head.cfg.scales) << "\n";
    out << "reduced_dim=" << head.cfg.reduced_dim << "\n";
    out << "pooling=" << pooling_to_string(head.cfg.pooling) << "\n";
    out << "num_classes=" << head.cfg.num_classes << "\n";
    const std::vector<const Parameter*> params = ordered_parameters(model, head);
    out << "params=" << params.size() << "\n";
    for (const Parameter* p : params) {
        out << p->name << "\n";
    }
    for (const Parameter* p : params) {
        save_tensor(out, p->value);
    }
    if (!out) {
        throw DataError("checkpoint: write failed for " + path.string());
    }
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path.string());
    }
    if (expect_line(in, "magic") != kCheckpointMagic) {
        throw DataError("checkpoint: bad magic in " + path.string());
    }
    BackboneConfig bcfg;
    bcfg.input_height = std::stoi(expect_field(in, "input_height"));
    bcfg.input_width = std::stoi(expect_field(in, "input_width"));
    bcfg.in_channels = std::stoi(expect_field(in, "in_channels"));
    const std::vector<int> stages = parse_csv(expect_field(in, "stage_channels"));
    if (stages.size() != 4) {
        throw DataError("checkpoint: expected 4 stage channels");
    }
    std::copy(stages.begin(), stages.end(), bcfg.stage_channels.begin());

    PyramidConfig pcfg;
    pcfg.scales = parse_csv(expect_field(in, "scales"));
    pcfg.reduced_dim = std::stoi(expect_field(in, "reduced_dim"));
    pcfg.pooling = pooling_from_string(expect_field(in, "pooling"));
    pcfg.num_classes = std::stoi(expect_field(in, "num_classes"));

    const auto param_count = static_cast<std::size_t>(std::stoul(expect_field(in, "params")));
    std::vector<std::string> names(param_count);
    for (std::string& name : names) {
        name = expect_line(in, "parameter name");
    }

    // Rebuild the architecture, then overwrite every parameter in order.
    Rng scratch(0);
    LoadedModel loaded;
    loaded.model.cfg = bcfg;
    loaded.model.layers = build_backbone_layers(bcfg.in_channels, bcfg.stage_channels, scratch);
    loaded.head = build_head(pcfg, bcfg.stage_channels[3], scratch);

    std::vector<Parameter*> params;
    for (Conv2dLayer& layer : loaded.model.layers) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    for (Conv2dLayer& layer : loaded.head.reduce) {
        params.push_back(&layer.weight);
        params.push_back(&layer.bias);
    }
    for (LinearLayer& layer : loaded.head.fc) {
        params.push_back(&layer.weight);
    }
    if (params.size() != param_count) {
        throw DataError("checkpoint: parameter count does not match architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->name != names[i]) {
            throw DataError("checkpoint: parameter '" + names[i] +
                            "' does not match expected '" + params[i]->name + "'");
        }
        Tensor value = load_tensor(in);
        if (!value.same_shape(params[i]->value)) {
            throw DataError("checkpoint: shape mismatch for " + names[i]);
        }
        params[i]->value = std::move(value);
    }
    return loaded;
}

}  // namespace hpm
