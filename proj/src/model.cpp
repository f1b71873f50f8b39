#include "nst/model.hpp"

#include <sstream>
#include <stdexcept>

namespace nst {

namespace {

constexpr const char* kAdamStepKey = "adam.step";

}  // namespace

Checkpoint to_checkpoint(const TrainedModel& model) {
    Checkpoint ckpt;
    ckpt.config = model.config;
    ckpt.tensors = model.params;
    for (const auto& [name, t] : model.adam.m) ckpt.tensors.emplace("adam.m." + name, t);
    for (const auto& [name, t] : model.adam.v) ckpt.tensors.emplace("adam.v." + name, t);
    ckpt.tensors.emplace(kAdamStepKey, Tensor::scalar(static_cast<double>(model.adam.step)));
    return ckpt;
}

TrainedModel model_from_checkpoint(const Checkpoint& ckpt) {
    TrainedModel model;
    model.config = ckpt.config;
    model.adam.config = adam_config(ckpt.config);
    for (const auto& [name, t] : ckpt.tensors) {
        if (name == kAdamStepKey) {
            model.adam.step = static_cast<std::uint64_t>(t.item());
        } else if (name.starts_with("adam.m.")) {
            model.adam.m.emplace(name.substr(7), t);
        } else if (name.starts_with("adam.v.")) {
            model.adam.v.emplace(name.substr(7), t);
        } else {
            model.params.emplace(name, t);
        }
    }
    return model;
}

TrainedModel model_from_train_result(TrainResult result) {
    TrainedModel model;
    model.config = std::move(result.config);
    model.params = std::move(result.params);
    model.adam = std::move(result.adam);
    return model;
}

bool is_adain_model(const TrainedModel& model) { return model.config.model_kind == "adain"; }

Tensor stylize_image(const TrainedModel& model, const Tensor& content, const Tensor& style) {
    if (is_adain_model(model)) {
        return adain_stylize(content, style, loss_network(model.config), model.params);
    }
    const StyleEmbedding s = model_embed(model, style);
    return transfer_forward(content, s, model.params, transfer_config(model.config));
}

StyleEmbedding model_embed(const TrainedModel& model, const Tensor& image) {
    if (is_adain_model(model)) {
        throw std::invalid_argument("the adain baseline has no prediction network to embed with");
    }
    return predict_embedding(image, model.params, prediction_config(model.config));
}

Tensor model_bottleneck(const TrainedModel& model, const Tensor& image) {
    if (is_adain_model(model)) {
        throw std::invalid_argument("the adain baseline has no prediction network to embed with");
    }
    return predict_bottleneck(image, model.params, prediction_config(model.config));
}

std::vector<std::uint64_t> recorded_style_hashes(const TrainedModel& model) {
    std::vector<std::uint64_t> hashes;
    std::istringstream is(model.config.style_corpus_hashes);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        hashes.push_back(std::stoull(item, nullptr, 16));
    }
    return hashes;
}

}  // namespace nst
