#pragma once

#include "nst/checkpoint.hpp"
#include "nst/training.hpp"

namespace nst {

// A trained model plus everything needed to run or resume it.
struct TrainedModel {
    RunConfig config;
    ModelParams params;  // "t.*"/"p.*" for joint models, "d.*" for the adain baseline
    AdamState adam;
};

Checkpoint to_checkpoint(const TrainedModel& model);
TrainedModel model_from_checkpoint(const Checkpoint& ckpt);
TrainedModel model_from_train_result(TrainResult result);

bool is_adain_model(const TrainedModel& model);

// Renders content under the style image: T(c, P(s)) for joint models, the
// encoder/statistics/decoder route for the adain baseline.
Tensor stylize_image(const TrainedModel& model, const Tensor& content, const Tensor& style);

// Embedding of an arbitrary image under a joint model's prediction network.
StyleEmbedding model_embed(const TrainedModel& model, const Tensor& image);

// The prediction network's compressed internal representation of an image.
Tensor model_bottleneck(const TrainedModel& model, const Tensor& image);

// Training-corpus hashes recorded in the model's config.
std::vector<std::uint64_t> recorded_style_hashes(const TrainedModel& model);

}  // namespace nst
