#include <doctest.h>

#include <cstring>
#include <sstream>

#include "hpm/commands.hpp"
#include "hpm/errors.hpp"
#include "hpm/trainer.hpp"
#include "support/properties.hpp"

using namespace hpm;

namespace {

// Small pipeline the training tests share: 128x16 inputs, thin channels.
RunConfig small_config() {
    RunConfig cfg;
    cfg.backbone.input_width = 16;
    cfg.backbone.stage_channels = {4, 4, 8, 8};
    cfg.synth.width = 16;
    cfg.pyramid.reduced_dim = 8;
    cfg.train.batch_size = 8;
    return cfg;
}

std::vector<Sample> small_dataset(RunConfig& cfg, int num_ids, int images, int cams) {
    cfg.synth.num_ids = num_ids;
    cfg.synth.images_per_id_per_cam = images;
    cfg.synth.num_cams = cams;
    cfg.synth.misalignment_max = 2;
    cfg.synth.noise_std = 0.03f;
    return generate_synthetic(cfg.synth);
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("flip_horizontal reverses columns") {
    Tensor image({3, 2, 4});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 4; ++x) {
                image.at(c, y, x) = static_cast<float>(100 * c + 10 * y + x);
            }
        }
    }
    const Tensor flipped = flip_horizontal(image);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 2; ++y) {
            for (int x = 0; x < 4; ++x) {
                CHECK(flipped.at(c, y, x) == image.at(c, y, 3 - x));
            }
        }
    }
}

TEST_CASE("flip involution property") {
    CHECK(properties::flip_involution(200, 21) == 0);
}

TEST_CASE("normalization with identity parameters is the identity") {
    Rng rng(1);
    const Tensor image = uniform(rng, {3, 4, 4}, 0.0f, 1.0f);
    const Tensor out = normalize_image(image, {0.0f, 0.0f, 0.0f}, {1.0f, 1.0f, 1.0f});
    CHECK(std::memcmp(out.data(), image.data(), image.size() * sizeof(float)) == 0);
    CHECK_THROWS_AS(normalize_image(image, {0.f, 0.f, 0.f}, {1.f, 0.f, 1.f}),
                    std::invalid_argument);
}

TEST_CASE("augment without flipping is normalization only") {
    Rng rng(2);
    const Tensor image = uniform(rng, {3, 4, 4}, 0.0f, 1.0f);
    TrainConfig cfg;
    cfg.flip_augment = false;
    Rng aug_rng(3);
    const Tensor out = augment(image, aug_rng, cfg);
    const Tensor expect = normalize_image(image, cfg.normalize_mean, cfg.normalize_std);
    CHECK(std::memcmp(out.data(), expect.data(), out.size() * sizeof(float)) == 0);
}

TEST_CASE("augment flips roughly half the time") {
    Rng rng(4);
    Tensor image({3, 1, 2});
    image.at(0, 0, 0) = 1.0f;  // asymmetric
    TrainConfig cfg;
    cfg.normalize_mean = {0.0f, 0.0f, 0.0f};
    cfg.normalize_std = {1.0f, 1.0f, 1.0f};
    Rng aug_rng(5);
    int flips = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        const Tensor out = augment(image, aug_rng, cfg);
        if (out.at(0, 0, 1) == 1.0f) {
            ++flips;
        }
    }
    CHECK(flips > trials / 2 - 60);
    CHECK(flips < trials / 2 + 60);
}

TEST_CASE("label map follows sorted person ids") {
    std::vector<Sample> samples(4);
    samples[0].person_id = 9;
    samples[1].person_id = 2;
    samples[2].person_id = 9;
    samples[3].person_id = 5;
    const std::vector<int> labels = build_labels(samples);
    CHECK(labels == std::vector<int>{2, 0, 2, 1});
    CHECK(count_classes(samples) == 3);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    RunConfig cfg = small_config();
    const std::vector<Sample> data = small_dataset(cfg, 3, 2, 2);
    const std::vector<Sample> train_split = filter_split(data, Split::train);
    cfg.train.epochs = 1;
    cfg.train.base_lr = 0.0f;
    cfg.train.decay_epoch = 1;

    TrainedModel tm = train_on(cfg, train_split);
    Rng master(cfg.train.seed);
    Rng brng = master.child("init/backbone");
    RunConfig fresh = cfg;
    fresh.backbone = cfg.backbone;
    BackboneModel untouched = build_backbone(fresh.backbone, brng);
    for (std::size_t l = 0; l < untouched.layers.size(); ++l) {
        const Tensor& a = tm.model.layers[l].weight.value;
        const Tensor& b = untouched.layers[l].weight.value;
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("single sample with a single scale is memorized") {
    RunConfig cfg = small_config();
    cfg.synth.num_ids = 1;
    cfg.synth.images_per_id_per_cam = 1;
    cfg.synth.num_cams = 1;
    cfg.synth.misalignment_max = 0;
    cfg.synth.noise_std = 0.0f;
    std::vector<Sample> data = generate_synthetic(cfg.synth);
    REQUIRE(data.size() == 1);
    data[0].split = Split::train;

    cfg.pyramid.scales = {1};
    cfg.pyramid.num_classes = 2;
    cfg.train.epochs = 50;
    cfg.train.decay_epoch = 50;
    cfg.train.base_lr = 0.01f;
    cfg.train.flip_augment = false;

    TrainedModel tm = train_on(cfg, data);
    CHECK(tm.log.records.back().mean_loss < 0.1f);

    const std::vector<float> acc = evaluate_classification(tm.model, tm.head, data, cfg.train);
    CHECK(acc.size() == 1);
    CHECK(acc[0] == 1.0f);
}

TEST_CASE("training trajectory is reproducible bit for bit") {
    RunConfig cfg = small_config();
    const std::vector<Sample> data = small_dataset(cfg, 4, 2, 2);
    const std::vector<Sample> train_split = filter_split(data, Split::train);
    cfg.train.epochs = 3;
    cfg.train.decay_epoch = 2;

    TrainedModel a = train_on(cfg, train_split);
    TrainedModel b = train_on(cfg, train_split);
    REQUIRE(a.log.records.size() == b.log.records.size());
    for (std::size_t e = 0; e < a.log.records.size(); ++e) {
        CHECK(a.log.records[e].mean_loss == b.log.records[e].mean_loss);
        CHECK(a.log.records[e].branch_accuracy == b.log.records[e].branch_accuracy);
    }
    for (std::size_t l = 0; l < a.model.layers.size(); ++l) {
        CHECK(std::memcmp(a.model.layers[l].weight.value.data(),
                          b.model.layers[l].weight.value.data(),
                          a.model.layers[l].weight.value.size() * sizeof(float)) == 0);
    }
    for (std::size_t k = 0; k < a.head.fc.size(); ++k) {
        CHECK(std::memcmp(a.head.fc[k].weight.value.data(),
                          b.head.fc[k].weight.value.data(),
                          a.head.fc[k].weight.value.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("different seeds give different trajectories") {
    RunConfig cfg = small_config();
    const std::vector<Sample> data = small_dataset(cfg, 4, 2, 2);
    const std::vector<Sample> train_split = filter_split(data, Split::train);
    cfg.train.epochs = 1;
    cfg.train.decay_epoch = 1;
    TrainedModel a = train_on(cfg, train_split);
    cfg.train.seed = 999;
    TrainedModel b = train_on(cfg, train_split);
    CHECK(a.log.records[0].mean_loss != b.log.records[0].mean_loss);
}

TEST_CASE("striped dataset with 8 identities trains the global branch") {
    RunConfig cfg = small_config();
    cfg.backbone.input_width = 32;
    cfg.synth.width = 32;
    cfg.backbone.stage_channels = {16, 32, 64, 64};
    cfg.pyramid.reduced_dim = 16;
    const std::vector<Sample> data = small_dataset(cfg, 8, 6, 2);
    const std::vector<Sample> train_split = filter_split(data, Split::train);
    cfg.train.epochs = 40;
    cfg.train.decay_epoch = 30;

    TrainedModel tm = train_on(cfg, train_split);
    CHECK(tm.log.records.back().mean_loss < tm.log.records.front().mean_loss);

    const std::vector<float> acc =
        evaluate_classification(tm.model, tm.head, train_split, cfg.train);
    CHECK(acc.front() >= 0.9f);  // global branch
    for (float a : acc) {
        CHECK(a >= 0.0f);
        CHECK(a <= 1.0f);
    }
}

TEST_CASE("untrained accuracy is near chance") {
    RunConfig cfg = small_config();
    const std::vector<Sample> data = small_dataset(cfg, 8, 3, 2);
    cfg.pyramid.num_classes = 8;
    Rng master(3);
    Rng brng = master.child("b");
    Rng hrng = master.child("h");
    BackboneModel model = build_backbone(cfg.backbone, brng);
    PyramidHead head = build_head(cfg.pyramid, cfg.backbone.stage_channels[3], hrng);

    const std::vector<float> acc = evaluate_classification(model, head, data, cfg.train);
    // 48 samples, p = 1/8: binomial 3 sigma is about 0.135.
    for (float a : acc) {
        CHECK(a <= 0.125f + 0.14f);
    }
    CHECK_THROWS_AS(evaluate_classification(model, head, {}, cfg.train), DataError);
}

TEST_CASE("train log line format") {
    TrainLog log;
    EpochRecord r;
    r.epoch = 0;
    r.mean_loss = 12.5f;
    r.lr = 0.0001f;
    r.branch_accuracy = {0.5f, 0.25f, 0.75f};
    log.records.push_back(r);
    PyramidConfig pyramid;
    pyramid.scales = {1, 2};
    std::ostringstream out;
    write_train_log(out, log, pyramid);
    const std::string text = out.str();
    CHECK(text.find("epoch=0") != std::string::npos);
    CHECK(text.find("loss=12.500000") != std::string::npos);
    CHECK(text.find("lr=0.0001") != std::string::npos);
    CHECK(text.find("acc_0_0=0.5000") != std::string::npos);
    CHECK(text.find("acc_1_0=0.2500") != std::string::npos);
    CHECK(text.find("acc_1_1=0.7500") != std::string::npos);
}

TEST_CASE("non-finite loss raises a numeric error") {
    RunConfig cfg = small_config();
    const std::vector<Sample> data = small_dataset(cfg, 3, 2, 2);
    const std::vector<Sample> train_split = filter_split(data, Split::train);
    cfg.train.epochs = 6;
    cfg.train.decay_epoch = 6;
    cfg.train.base_lr = 1e6f;  // guaranteed blow-up
    CHECK_THROWS_AS(train_on(cfg, train_split), NumericError);
}

TEST_SUITE_END();
