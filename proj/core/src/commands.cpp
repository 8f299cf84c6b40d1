#include "hpm/commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hpm/errors.hpp"

namespace hpm {
namespace {

namespace fs = std::filesystem;

void ensure_parent(const fs::path& path) {
    const fs::path parent = path.parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
    }
}

void check_checkpoint_compatible(const RunConfig& cfg, const LoadedModel& loaded) {
    if (loaded.model.cfg.input_height != cfg.backbone.input_height ||
        loaded.model.cfg.input_width != cfg.backbone.input_width) {
        throw DataError("checkpoint input size does not match config");
    }
    if (loaded.model.cfg.stage_channels != cfg.backbone.stage_channels) {
        throw DataError("checkpoint stage channels do not match config");
    }
    if (loaded.head.cfg.scales != cfg.pyramid.scales) {
        throw DataError("checkpoint was trained with different pyramid scales");
    }
    if (loaded.head.cfg.reduced_dim != cfg.pyramid.reduced_dim) {
        throw DataError("checkpoint reduced_dim does not match config");
    }
    if (loaded.head.cfg.pooling != cfg.pyramid.pooling) {
        throw DataError("checkpoint pooling strategy does not match config");
    }
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

TrainedModel train_on(const RunConfig& cfg, const std::vector<Sample>& train_split) {
    if (train_split.empty()) {
        throw DataError("training split is empty");
    }
    RunConfig effective = cfg;
    const int derived = count_classes(train_split);
    if (effective.pyramid.num_classes == 0) {
        effective.pyramid.num_classes = derived;
    } else if (effective.pyramid.num_classes < derived) {
        throw ConfigError("num_classes is smaller than the number of identities");
    }
    if (effective.pyramid.num_classes < 2) {
        throw DataError("need at least 2 identities to train");
    }

    const Rng master(cfg.train.seed);
    Rng backbone_rng = master.child("init/backbone");
    Rng head_rng = master.child("init/head");

    TrainedModel out{build_backbone(effective.backbone, backbone_rng),
                     build_head(effective.pyramid, effective.backbone.stage_channels[3],
                                head_rng),
                     {}};
    out.log = train(out.model, out.head, train_split, effective.train);
    return out;
}

std::vector<Descriptor> extract_split(const BackboneModel& model, const PyramidHead& head,
                                      const std::vector<Sample>& samples,
                                      const TrainConfig& train_cfg, bool flip_sum) {
    std::vector<Descriptor> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) {
        const Tensor image =
            normalize_image(s.image, train_cfg.normalize_mean, train_cfg.normalize_std);
        Descriptor d;
        d.values = normalize(extract_descriptor(model, head, image, flip_sum));
        d.person_id = s.person_id;
        d.camera_id = s.camera_id;
        d.is_query = s.split == Split::query;
        out.push_back(std::move(d));
    }
    return out;
}

void run_gen_data(const RunConfig& cfg, const fs::path& out_root) {
    const std::vector<Sample> samples = generate_synthetic(cfg.synth);
    std::error_code ec;
    fs::create_directories(out_root, ec);
    write_dataset(out_root, samples);
}

void run_train(const RunConfig& cfg, const fs::path& checkpoint_path,
               const fs::path& log_path) {
    const std::vector<Sample> dataset =
        load_dataset(cfg.data_dir, cfg.backbone.input_height, cfg.backbone.input_width);
    const std::vector<Sample> train_split = filter_split(dataset, Split::train);
    if (train_split.empty()) {
        throw DataError("dataset has no train split: " + cfg.data_dir);
    }

    RunConfig effective = cfg;
    const int derived = count_classes(train_split);
    if (effective.pyramid.num_classes == 0) {
        effective.pyramid.num_classes = derived;
    } else if (effective.pyramid.num_classes < derived) {
        throw ConfigError("num_classes is smaller than the number of identities");
    }

    const Rng master(cfg.train.seed);
    Rng backbone_rng = master.child("init/backbone");
    Rng head_rng = master.child("init/head");
    BackboneModel model = build_backbone(effective.backbone, backbone_rng);
    PyramidHead head =
        build_head(effective.pyramid, effective.backbone.stage_channels[3], head_rng);

    validate_train_config(effective.train);
    const Rng run_rng(effective.train.seed);
    SgdMomentum opt(effective.train.base_lr, effective.train.momentum,
                    effective.train.decay_epoch);
    TrainLog log;
    ensure_parent(checkpoint_path);
    for (int epoch = 0; epoch < effective.train.epochs; ++epoch) {
        log.records.push_back(
            train_epoch(model, head, train_split, opt, effective.train, epoch, run_rng));
        if (effective.save_interval > 0 && (epoch + 1) % effective.save_interval == 0 &&
            epoch + 1 < effective.train.epochs) {
            save_checkpoint(checkpoint_path.string() + ".epoch" + std::to_string(epoch + 1),
                            model, head);
        }
    }
    save_checkpoint(checkpoint_path, model, head);

    ensure_parent(log_path);
    std::ofstream log_out(log_path);
    if (!log_out) {
        throw DataError("cannot write train log: " + log_path.string());
    }
    write_train_log(log_out, log, effective.pyramid);
}

void run_extract(const RunConfig& cfg, const fs::path& checkpoint_path, Split split,
                 const fs::path& out_path, const fs::path& heatmap_dir) {
    const LoadedModel loaded = load_checkpoint(checkpoint_path);
    check_checkpoint_compatible(cfg, loaded);
    const std::vector<Sample> dataset =
        load_dataset(cfg.data_dir, cfg.backbone.input_height, cfg.backbone.input_width);
    const std::vector<Sample> subset = filter_split(dataset, split);
    if (subset.empty()) {
        throw DataError("split '" + split_to_string(split) + "' is empty in " +
                        cfg.data_dir);
    }
    const std::vector<Descriptor> descriptors =
        extract_split(loaded.model, loaded.head, subset, cfg.train, cfg.flip_sum);
    ensure_parent(out_path);
    save_descriptors(out_path, descriptors);

    if (!heatmap_dir.empty()) {
        std::error_code ec;
        fs::create_directories(heatmap_dir, ec);
        int index = 0;
        for (const Sample& s : subset) {
            const Tensor image =
                normalize_image(s.image, cfg.train.normalize_mean, cfg.train.normalize_std);
            const Tensor feature = backbone_forward(
                loaded.model, image.reshaped(Shape{1, image.extent(0), image.extent(1),
                                                   image.extent(2)}));
            const Tensor single = feature.reshaped(
                Shape{feature.extent(1), feature.extent(2), feature.extent(3)});
            char name[64];
            std::snprintf(name, sizeof(name), "%06d_%04d_c%d.pgm", index++, s.person_id,
                          s.camera_id);
            save_pgm(heatmap_dir / name, heatmap(single));
        }
    }
}

EvalReport run_eval(const fs::path& query_path, const fs::path& gallery_path, int topk,
                    const fs::path& out_report) {
    const std::vector<Descriptor> queries = load_descriptors(query_path);
    const std::vector<Descriptor> gallery = load_descriptors(gallery_path);
    if (!queries.empty() && !gallery.empty() &&
        queries.front().values.size() != gallery.front().values.size()) {
        throw DataError("query and gallery descriptor dimensions differ");
    }
    EvalReport report;
    try {
        report = evaluate(queries, gallery, topk);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    ensure_parent(out_report);
    std::ofstream out(out_report);
    if (!out) {
        throw DataError("cannot write report: " + out_report.string());
    }
    write_report(out, report);
    std::ofstream csv(out_report.string() + ".cmc.csv");
    if (!csv) {
        throw DataError("cannot write CMC csv next to " + out_report.string());
    }
    write_cmc_csv(csv, report);
    return report;
}

AblationRow train_and_evaluate(const RunConfig& cfg, const std::vector<Sample>& dataset,
                               const std::string& variant_label) {
    const std::vector<Sample> train_split = filter_split(dataset, Split::train);
    const std::vector<Sample> query_split = filter_split(dataset, Split::query);
    const std::vector<Sample> gallery_split = filter_split(dataset, Split::gallery);
    if (train_split.empty() || query_split.empty() || gallery_split.empty()) {
        throw DataError("variant '" + variant_label + "': dataset is missing a split");
    }
    TrainedModel trained = train_on(cfg, train_split);
    const std::vector<Descriptor> queries = extract_split(
        trained.model, trained.head, query_split, cfg.train, cfg.flip_sum);
    const std::vector<Descriptor> gallery = extract_split(
        trained.model, trained.head, gallery_split, cfg.train, cfg.flip_sum);
    const EvalReport report = evaluate(queries, gallery, 10);

    AblationRow row;
    row.variant = variant_label;
    row.feature_dim = cfg.pyramid.reduced_dim * total_bins(cfg.pyramid);
    row.r1 = report.cmc.size() > 0 ? report.cmc[0] : 0.0f;
    row.r5 = report.cmc.size() > 4 ? report.cmc[4] : row.r1;
    row.r10 = report.cmc.size() > 9 ? report.cmc[9] : row.r5;
    row.map = report.map;
    return row;
}

std::vector<AblationRow> run_ablate(const RunConfig& base, const fs::path& sweep_path,
                                    const fs::path& out_table) {
    std::ifstream sweep(sweep_path);
    if (!sweep) {
        throw DataError("cannot open sweep spec: " + sweep_path.string());
    }
    std::vector<std::string> variants;
    std::string line;
    while (std::getline(sweep, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (!line.empty()) {
            variants.push_back(line);
        }
    }
    if (variants.empty()) {
        throw ConfigError("sweep spec lists no variants: " + sweep_path.string());
    }

    const std::vector<Sample> dataset =
        load_dataset(base.data_dir, base.backbone.input_height, base.backbone.input_width);

    std::vector<AblationRow> rows;
    rows.reserve(variants.size());
    for (const std::string& variant : variants) {
        RunConfig cfg = base;
        std::istringstream tokens(variant);
        std::string token;
        while (tokens >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("sweep variant '" + variant +
                                  "': expected key=value tokens");
            }
            apply_config_entry(cfg, token.substr(0, eq), token.substr(eq + 1));
        }
        validate_run_config(cfg);
        try {
            rows.push_back(train_and_evaluate(cfg, dataset, variant));
        } catch (const NumericError& e) {
            throw NumericError("variant '" + variant + "' failed: " + e.what());
        } catch (const DataError& e) {
            throw DataError("variant '" + variant + "' failed: " + e.what());
        } catch (const std::exception& e) {
            throw DataError("variant '" + variant + "' failed: " + e.what());
        }
    }

    ensure_parent(out_table);
    std::ofstream out(out_table);
    if (!out) {
        throw DataError("cannot write ablation table: " + out_table.string());
    }
    out << "variant\tfeature_dim\tr1\tr5\tr10\tmap\n";
    char buf[128];
    for (const AblationRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%d\t%.4f\t%.4f\t%.4f\t%.4f\n",
                      row.variant.c_str(), row.feature_dim, row.r1, row.r5, row.r10,
                      row.map);
        out << buf;
    }
    return rows;
}

}  // namespace hpm
