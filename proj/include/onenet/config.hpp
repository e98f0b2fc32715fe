#pragma once

#include <map>
#include <string>

#include "onenet/common.hpp"

namespace onenet {

enum class Variant { onenet_e, onenet_ed, unet_baseline };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

// Declarative description of a network. The encoder downscales L+1 times for
// OneNet variants (input unshuffle stem plus L blocks) and L times for the
// baseline (stem at full resolution, L pooled stages); all variants emit
// logits at half the input resolution.
struct ModelConfig {
    Variant variant = Variant::onenet_ed;
    i64 layers = 4;
    i64 base_channels = 64;
    i64 scale = 2;
    bool use_spatial = false;
    i64 spatial_kernel = 9;
    i64 num_classes = 2;
    i64 input_channels = 3;

    void validate() const;
    // Smallest input extent divisor the architecture requires.
    i64 required_divisor() const;
    // Channel width entering decoder stage 0 (the bottleneck).
    i64 bottleneck_channels() const;

    std::string canonical_text() const;
    u64 hash() const { return fnv1a64(canonical_text()); }
};

// Flat key=value text (one pair per line, '#' comments). Unknown keys are
// rejected. `apply_override` feeds CLI --set pairs through the same parser.
ModelConfig parse_model_config(const std::string& text);
void apply_model_override(ModelConfig& cfg, const std::string& key, const std::string& value);
bool is_model_config_key(const std::string& key);

// Training settings live in the same flat files under distinct keys.
struct TrainSettings {
    i64 epochs = 300;
    double lr = 1e-4;
    double lr_decay = 0.1;
    i64 lr_decay_every = 20;
    i64 lr_decay_start = 50;
    i64 batch_size = 16;
    double background_weight = 0.25;
    u64 seed = 17;
    i64 samples = 64;
    i64 image_size = 64;

    void validate() const;
    std::string canonical_text() const;
};

struct RunConfig {
    ModelConfig model;
    TrainSettings train;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace onenet
