#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hpm/commands.hpp"
#include "hpm/errors.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

hpm::RunConfig load_config(const CommonArgs& args) {
    hpm::RunConfig cfg = args.config_path.empty()
                             ? hpm::RunConfig{}
                             : hpm::load_run_config(args.config_path);
    if (args.seed) {
        cfg.train.seed = *args.seed;
        cfg.synth.seed = *args.seed;
    }
    hpm::validate_run_config(cfg);
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file (key=value lines)");
    cmd->add_option("--seed", args.seed, "Override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Horizontal pyramid matching person re-identification toolkit"};
    app.require_subcommand(1);

    CommonArgs gen_args;
    std::string gen_out;
    CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic striped dataset");
    add_common(gen, gen_args);
    gen->add_option("--out", gen_out, "Dataset root (defaults to config data_dir)");

    CommonArgs train_args;
    std::string train_out;
    CLI::App* train = app.add_subcommand("train", "Train a model on the train split");
    add_common(train, train_args);
    train->add_option("--out", train_out, "Output directory (defaults to config out_dir)");

    CommonArgs extract_args;
    std::string extract_ckpt;
    std::string extract_split = "gallery";
    std::string extract_out;
    std::string extract_heatmaps;
    CLI::App* extract =
        app.add_subcommand("extract", "Write descriptors for a dataset split");
    add_common(extract, extract_args);
    extract->add_option("--checkpoint", extract_ckpt, "Model checkpoint")->required();
    extract->add_option("--split", extract_split, "train, query or gallery");
    extract->add_option("--out", extract_out, "Descriptor file path")->required();
    extract->add_option("--heatmaps", extract_heatmaps,
                        "Also write per-image feature heatmaps (PGM) here");

    std::string eval_query;
    std::string eval_gallery;
    std::string eval_out = "report.txt";
    int eval_topk = 20;
    CLI::App* eval = app.add_subcommand("eval", "CMC/mAP for query vs gallery descriptors");
    eval->add_option("query", eval_query, "Query descriptor file")->required();
    eval->add_option("gallery", eval_gallery, "Gallery descriptor file")->required();
    eval->add_option("--topk", eval_topk, "CMC curve length");
    eval->add_option("--out", eval_out, "Report file path");

    CommonArgs ablate_args;
    std::string ablate_sweep;
    std::string ablate_out = "ablation.txt";
    CLI::App* ablate =
        app.add_subcommand("ablate", "Train and evaluate a sweep of head variants");
    add_common(ablate, ablate_args);
    ablate->add_option("--sweep", ablate_sweep, "Variant spec, one key=value line each")
        ->required();
    ablate->add_option("--out", ablate_out, "Table file path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            const hpm::RunConfig cfg = load_config(gen_args);
            hpm::run_gen_data(cfg, gen_out.empty() ? cfg.data_dir : gen_out);
        } else if (train->parsed()) {
            const hpm::RunConfig cfg = load_config(train_args);
            const std::filesystem::path out_dir =
                train_out.empty() ? cfg.out_dir : train_out;
            hpm::run_train(cfg, out_dir / "checkpoint.hpmc", out_dir / "train.log");
        } else if (extract->parsed()) {
            const hpm::RunConfig cfg = load_config(extract_args);
            hpm::run_extract(cfg, extract_ckpt, hpm::split_from_string(extract_split),
                             extract_out, extract_heatmaps);
        } else if (eval->parsed()) {
            if (eval_topk < 1) {
                throw hpm::ConfigError("--topk must be >= 1");
            }
            hpm::run_eval(eval_query, eval_gallery, eval_topk, eval_out);
        } else if (ablate->parsed()) {
            const hpm::RunConfig cfg = load_config(ablate_args);
            hpm::run_ablate(cfg, ablate_sweep, ablate_out);
        }
    } catch (const hpm::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const hpm::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const hpm::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return 0;
}
