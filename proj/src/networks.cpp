#include "nst/networks.hpp"

#include <stdexcept>

namespace nst {

void TransferNetConfig::validate() const {
    if (channels.size() != 3) {
        throw std::invalid_argument("transfer net needs a 3-stage encoder channel plan, got " +
                                    std::to_string(channels.size()) + " entries");
    }
    for (std::size_t c : channels) {
        if (c == 0) throw std::invalid_argument("transfer net channel counts must be positive");
    }
}

std::vector<LayerSlice> embedding_layout(const TransferNetConfig& config) {
    config.validate();
    std::vector<LayerSlice> layout;
    std::size_t offset = 0;
    auto push = [&layout, &offset](std::string id, std::size_t c) {
        layout.push_back(LayerSlice{std::move(id), c, offset});
        offset += 2 * c;
    };
    push("conv1", config.channels[0]);
    push("conv2", config.channels[1]);
    push("conv3", config.channels[2]);
    for (std::size_t r = 1; r <= config.residual_blocks; ++r) {
        push("res" + std::to_string(r) + "a", config.channels[2]);
        push("res" + std::to_string(r) + "b", config.channels[2]);
    }
    push("up1", config.channels[1]);
    push("up2", config.channels[0]);
    push("out", 3);
    return layout;
}

std::size_t embedding_dim(const TransferNetConfig& config) {
    std::size_t dim = 0;
    for (const LayerSlice& s : embedding_layout(config)) dim += 2 * s.channels;
    return dim;
}

std::vector<NormParams> slice_embedding(const StyleEmbedding& s, const TransferNetConfig& config) {
    const std::vector<LayerSlice> layout = embedding_layout(config);
    const std::size_t want = embedding_dim(config);
    if (s.dim() != want) {
        throw std::invalid_argument("embedding dim mismatch: expected " + std::to_string(want) + ", got " +
                                    std::to_string(s.dim()));
    }
    std::vector<NormParams> out;
    out.reserve(layout.size());
    for (const LayerSlice& slice : layout) {
        NormParams p;
        p.layer_id = slice.layer_id;
        p.gamma = Tensor(Shape{slice.channels});
        p.beta = Tensor(Shape{slice.channels});
        for (std::size_t i = 0; i < slice.channels; ++i) {
            p.gamma[i] = s.values[slice.offset + i];
            p.beta[i] = s.values[slice.offset + slice.channels + i];
        }
        out.push_back(std::move(p));
    }
    return out;
}

StyleEmbedding concat_norm_params(const std::vector<NormParams>& params) {
    std::size_t dim = 0;
    for (const NormParams& p : params) dim += p.gamma.size() + p.beta.size();
    StyleEmbedding s;
    s.values = Tensor(Shape{dim});
    std::size_t at = 0;
    for (const NormParams& p : params) {
        for (std::size_t i = 0; i < p.gamma.size(); ++i) s.values[at++] = p.gamma[i];
        for (std::size_t i = 0; i < p.beta.size(); ++i) s.values[at++] = p.beta[i];
    }
    return s;
}

PredictionNetConfig PredictionNetConfig::desk(const TransferNetConfig& transfer) {
    PredictionNetConfig c;
    c.output_dim = embedding_dim(transfer);
    c.validate();
    return c;
}

PredictionNetConfig PredictionNetConfig::full(const TransferNetConfig& transfer) {
    PredictionNetConfig c;
    c.backbone_channels = {48, 192, 768};
    c.bottleneck_dim = 100;
    c.output_dim = embedding_dim(transfer);
    c.validate();
    return c;
}

void PredictionNetConfig::validate() const {
    if (backbone_channels.empty()) throw std::invalid_argument("prediction backbone needs at least one conv");
    if (backbone_kernel == 0 || backbone_stride == 0) {
        throw std::invalid_argument("prediction backbone kernel/stride must be positive");
    }
    if (output_dim == 0) throw std::invalid_argument("prediction net output_dim is unset");
    if (bottleneck_dim == 0 || bottleneck_dim >= output_dim) {
        throw std::invalid_argument("bottleneck dim must be positive and smaller than the embedding dim (" +
                                    std::to_string(bottleneck_dim) + " vs " + std::to_string(output_dim) + ")");
    }
}

ModelParams init_transfer_params(const TransferNetConfig& config, Rng& rng, double sigma) {
    config.validate();
    ModelParams params;
    std::size_t in_c = 3;
    auto conv = [&](const std::string& name, std::size_t out_c, std::size_t k) {
        params["t." + name + ".k"] = rng.normal_tensor(Shape{out_c, in_c, k, k}, sigma);
        in_c = out_c;
    };
    conv("conv1", config.channels[0], 9);
    conv("conv2", config.channels[1], 3);
    conv("conv3", config.channels[2], 3);
    for (std::size_t r = 1; r <= config.residual_blocks; ++r) {
        conv("res" + std::to_string(r) + "a", config.channels[2], 3);
        conv("res" + std::to_string(r) + "b", config.channels[2], 3);
    }
    conv("up1", config.channels[1], 3);
    conv("up2", config.channels[0], 3);
    conv("out", 3, 9);
    return params;
}

ModelParams init_prediction_params(const PredictionNetConfig& config, const TransferNetConfig& transfer, Rng& rng,
                                   double sigma) {
    config.validate();
    if (config.output_dim != embedding_dim(transfer)) {
        throw std::invalid_argument("prediction output_dim " + std::to_string(config.output_dim) +
                                    " does not match embedding dim " + std::to_string(embedding_dim(transfer)));
    }
    ModelParams params;
    std::size_t in_c = 3;
    for (std::size_t i = 0; i < config.backbone_channels.size(); ++i) {
        const std::string name = "p.conv" + std::to_string(i + 1);
        params[name + ".k"] = rng.normal_tensor(
            Shape{config.backbone_channels[i], in_c, config.backbone_kernel, config.backbone_kernel}, sigma);
        params[name + ".b"] = Tensor(Shape{config.backbone_channels[i]});
        in_c = config.backbone_channels[i];
    }
    params["p.fc1.w"] = rng.normal_tensor(Shape{config.bottleneck_dim, config.pooled_dim()}, sigma);
    params["p.fc1.b"] = Tensor(Shape{config.bottleneck_dim});
    params["p.fc2.w"] = rng.normal_tensor(Shape{config.output_dim, config.bottleneck_dim}, sigma);
    Tensor out_bias(Shape{config.output_dim});
    for (const LayerSlice& slice : embedding_layout(transfer)) {
        for (std::size_t i = 0; i < slice.channels; ++i) out_bias[slice.offset + i] = 1.0;
    }
    params["p.fc2.b"] = std::move(out_bias);
    return params;
}

VarMap param_leaves(Tape& tape, const ModelParams& params) {
    VarMap vars;
    for (const auto& [name, tensor] : params) vars.emplace(name, tape.leaf(tensor));
    return vars;
}

namespace {

Var lookup(const VarMap& params, const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("missing parameter: " + name);
    return it->second;
}

struct EmbeddingSlices {
    std::vector<Var> gamma;
    std::vector<Var> beta;
};

EmbeddingSlices slice_embedding_vars(Var embedding, const std::vector<LayerSlice>& layout) {
    EmbeddingSlices s;
    for (const LayerSlice& slice : layout) {
        s.gamma.push_back(slice1d(embedding, slice.offset, slice.channels));
        s.beta.push_back(slice1d(embedding, slice.offset + slice.channels, slice.channels));
    }
    return s;
}

}  // namespace

Var transfer_forward(Tape& tape, Var content, Var embedding, const VarMap& params,
                     const TransferNetConfig& config) {
    config.validate();
    const Tensor& c = tape.value(content);
    if (c.rank() != 4 || c.extent(0) != 1 || c.extent(1) != 3) {
        throw std::invalid_argument("transfer_forward expects a [1,3,H,W] content image, got " +
                                    shape_str(c.shape()));
    }
    const std::size_t sp = config.stride_product();
    if (c.extent(2) % sp != 0 || c.extent(3) % sp != 0) {
        throw std::invalid_argument("content dims " + shape_str(c.shape()) + " must be divisible by " +
                                    std::to_string(sp));
    }
    const std::vector<LayerSlice> layout = embedding_layout(config);
    const std::size_t want = embedding_dim(config);
    const std::size_t got = tape.value(embedding).size();
    if (got != want) {
        throw std::invalid_argument("embedding dim mismatch: expected " + std::to_string(want) + ", got " +
                                    std::to_string(got));
    }
    const EmbeddingSlices slices = slice_embedding_vars(embedding, layout);

    std::size_t li = 0;
    auto cin = [&](Var x) {
        Var out = conditional_instance_norm(x, slices.gamma[li], slices.beta[li]);
        ++li;
        return out;
    };
    auto conv = [&](Var x, const std::string& name, std::size_t stride) {
        return conv2d(x, lookup(params, "t." + name + ".k"), stride, Padding::kSameReflect);
    };

    Var x = relu(cin(conv(content, "conv1", 1)));
    x = relu(cin(conv(x, "conv2", 2)));
    x = relu(cin(conv(x, "conv3", 2)));
    for (std::size_t r = 1; r <= config.residual_blocks; ++r) {
        Var h = relu(cin(conv(x, "res" + std::to_string(r) + "a", 1)));
        h = cin(conv(h, "res" + std::to_string(r) + "b", 1));
        x = add(x, h);
    }
    x = relu(cin(conv(upsample_nearest(x, 2), "up1", 1)));
    x = relu(cin(conv(upsample_nearest(x, 2), "up2", 1)));
    return sigmoid(cin(conv(x, "out", 1)));
}

Tensor transfer_forward(const Tensor& content, const StyleEmbedding& s, const ModelParams& params,
                        const TransferNetConfig& config) {
    Tape tape;
    Var out = transfer_forward(tape, tape.leaf(content), tape.leaf(s.values), param_leaves(tape, params), config);
    return tape.value(out);
}

namespace {

Var predict_bottleneck_var(Tape& tape, Var style, const VarMap& params, const PredictionNetConfig& config) {
    config.validate();
    const Tensor& s = tape.value(style);
    if (s.rank() != 4 || s.extent(0) != 1 || s.extent(1) != 3) {
        throw std::invalid_argument("predict_embedding expects a [1,3,H,W] style image, got " + shape_str(s.shape()));
    }
    Var x = style;
    for (std::size_t i = 0; i < config.backbone_channels.size(); ++i) {
        const std::string name = "p.conv" + std::to_string(i + 1);
        x = conv2d(x, lookup(params, name + ".k"), lookup(params, name + ".b"), config.backbone_stride,
                   Padding::kSameReflect);
        x = relu(x);
    }
    Var pooled = reshape(spatial_mean(x), Shape{config.pooled_dim()});
    return matvec(lookup(params, "p.fc1.w"), pooled, lookup(params, "p.fc1.b"));
}

}  // namespace

Var predict_embedding(Tape& tape, Var style, const VarMap& params, const PredictionNetConfig& config) {
    Var bottleneck = predict_bottleneck_var(tape, style, params, config);
    return matvec(lookup(params, "p.fc2.w"), bottleneck, lookup(params, "p.fc2.b"));
}

Tensor predict_bottleneck(const Tensor& style, const ModelParams& params, const PredictionNetConfig& config) {
    Tape tape;
    Var out = predict_bottleneck_var(tape, tape.leaf(style), param_leaves(tape, params), config);
    return tape.value(out);
}

StyleEmbedding predict_embedding(const Tensor& style, const ModelParams& params,
                                 const PredictionNetConfig& config) {
    Tape tape;
    Var out = predict_embedding(tape, tape.leaf(style), param_leaves(tape, params), config);
    return StyleEmbedding{tape.value(out)};
}

}  // namespace nst
