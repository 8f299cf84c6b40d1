#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hpm/config.hpp"
#include "hpm/metrics.hpp"
#include "hpm/model_io.hpp"

namespace hpm {

/// Shared pipeline pieces the subcommands (and the test suites) compose.

struct TrainedModel {
    BackboneModel model;
    PyramidHead head;
    TrainLog log;
};

/// Builds backbone+head from the config seed and trains on the given split.
/// num_classes 0 derives the class count from the data.
TrainedModel train_on(const RunConfig& cfg, const std::vector<Sample>& train_split);

/// Finalized (L2-normalized) descriptors for every sample of a split.
std::vector<Descriptor> extract_split(const BackboneModel& model, const PyramidHead& head,
                                      const std::vector<Sample>& samples,
                                      const TrainConfig& train_cfg, bool flip_sum);

/// One ablation table row.
struct AblationRow {
    std::string variant;
    int feature_dim = 0;
    float r1 = 0.0f;
    float r5 = 0.0f;
    float r10 = 0.0f;
    float map = 0.0f;
};

/// Subcommand bodies; they throw ConfigError / DataError / NumericError which
/// the CLI maps onto exit codes.

void run_gen_data(const RunConfig& cfg, const std::filesystem::path& out_root);

void run_train(const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
               const std::filesystem::path& log_path);

/// heatmap_dir, when non-empty, additionally writes one PGM heatmap of the
/// backbone feature map per image.
void run_extract(const RunConfig& cfg, const std::filesystem::path& checkpoint_path,
                 Split split, const std::filesystem::path& out_path,
                 const std::filesystem::path& heatmap_dir = {});

EvalReport run_eval(const std::filesystem::path& query_path,
                    const std::filesystem::path& gallery_path, int topk,
                    const std::filesystem::path& out_report);

std::vector<AblationRow> run_ablate(const RunConfig& base,
                                    const std::filesystem::path& sweep_path,
                                    const std::filesystem::path& out_table);

/// Trains one config on pre-loaded data and evaluates retrieval on the
/// query/gallery splits. Used by ablate and by the acceptance suite.
AblationRow train_and_evaluate(const RunConfig& cfg, const std::vector<Sample>& dataset,
                               const std::string& variant_label);

}  // namespace hpm
