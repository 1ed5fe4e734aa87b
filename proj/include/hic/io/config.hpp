#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "hic/io/synth.hpp"
#include "hic/prompting/prompting.hpp"
#include "hic/training/training.hpp"

namespace hic {

struct RunConfig {
    std::uint64_t seed = 0;
    SynthConfig synth;
    XFusionConfig model;  // frames and joints are taken from the dataset at run time
    TrainConfig train;
    std::size_t k = kDefaultAnchorCount;
    SamplingMethod method = SamplingMethod::Sps;
};

// Flat JSON object. Keys: seed, clips, frames, joints, clusters, noise,
// unit_to_mm, hidden, layers, spatial_first, compress_bias_init, learning_rate,
// lr_decay, steps, steps_per_epoch, batch_size, weight_decay, beta1, beta2,
// epsilon, loss_position, loss_velocity, loss_shape, domains, mask_ratio,
// train_soft_anchors, domain_filter_retrieval, k, method.
// Unknown keys and wrong value types raise ConfigError naming the key.
void apply_config(const nlohmann::json& flat, RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);

// Seeds of the individual stages, all derived from RunConfig::seed.
enum class SeedTag : std::uint64_t { Corpus = 11, Init = 12, Soft = 13, Train = 14, Eval = 15 };
std::uint64_t stage_seed(const RunConfig& config, SeedTag tag);

}  // namespace hic
