#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nst {

// Flat run configuration: one `key = value` per line, `#` starts a comment
// line, unknown keys are rejected with their line number. `arch_scale`
// selects a preset (desk or full) that explicit keys may then override.
struct RunConfig {
    std::string arch_scale = "desk";  // desk | full
    std::string precision = "f64";    // f64 | f32
    std::string model_kind = "joint";  // joint | adain
    std::uint64_t seed = 1;
    double lambda_s = 1.0;
    std::uint64_t budget = 2000;  // parameter updates
    std::size_t batch_size = 4;
    std::string content_dir;
    std::string style_dir;

    std::vector<std::size_t> transfer_channels = {8, 16, 32};
    std::size_t residual_blocks = 2;
    std::vector<std::size_t> pred_backbone_channels = {8, 16, 32};
    std::size_t pred_bottleneck_dim = 16;
    std::uint64_t loss_net_seed = 417;
    double init_sigma = 0.01;

    double adam_alpha = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    bool augment = true;
    double aug_flip_prob = 0.5;
    double aug_rescale_min = 0.8;
    double aug_rescale_max = 1.2;
    double aug_hue_max_rad = 0.1;
    double aug_contrast_min = 0.8;
    double aug_contrast_max = 1.2;

    double pixel_lr = 0.02;
    std::size_t optimize_steps = 200;

    std::size_t study_photo_count = 2;
    double tsne_perplexity = 15.0;
    std::size_t tsne_iters = 500;
    std::uint64_t trace_every = 10;

    // Hex hashes of the training style images, recorded when a model is
    // trained and carried through its checkpoints.
    std::string style_corpus_hashes;

    bool operator==(const RunConfig&) const = default;

    void validate() const;
};

RunConfig parse_config(std::string_view text, const std::string& source_name = "<config>");
RunConfig load_config_file(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

// Round-trip-exact decimal rendering of a double.
std::string format_double(double v);

}  // namespace nst
