#pragma once

#include <filesystem>

#include "hpm/backbone.hpp"
#include "hpm/hpp.hpp"

namespace hpm {

/// Backbone plus head checkpoint: a text header describing the architecture,
/// a name manifest, then the parameter tensors as consecutive "HPMT" blobs in
/// manifest order. Head entries are named reduce_i_j / fc_i_j.
void save_checkpoint(const std::filesystem::path& path, const BackboneModel& model,
                     const PyramidHead& head);

struct LoadedModel {
    BackboneModel model;
    PyramidHead head;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hpm
