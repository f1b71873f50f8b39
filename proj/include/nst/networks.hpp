#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nst/autodiff.hpp"
#include "nst/normalization.hpp"
#include "nst/rng.hpp"
#include "nst/tensor.hpp"

namespace nst {

// Encoder / residual / decoder image transformation network. Kernel sizes
// are 9,3,3 on the encoder, 3 inside residual and upsampling blocks and 9 on
// the output convolution; encoder strides are 1,2,2 and both upsampling
// stages use nearest-neighbor factor 2.
struct TransferNetConfig {
    std::vector<std::size_t> channels = {8, 16, 32};  // encoder plan
    std::size_t residual_blocks = 2;

    static TransferNetConfig desk() { return {}; }
    static TransferNetConfig full() { return {{32, 64, 128}, 5}; }

    std::size_t stride_product() const { return 4; }
    void validate() const;
};

// Concatenated per-channel (gamma, beta) pairs for every normalized
// convolution, in network depth order; layer slice i occupies
// [offset, offset + C) for gamma and [offset + C, offset + 2C) for beta.
struct StyleEmbedding {
    Tensor values;  // rank 1
    std::size_t dim() const { return values.size(); }
};

struct LayerSlice {
    std::string layer_id;
    std::size_t channels = 0;
    std::size_t offset = 0;  // of gamma; beta follows at offset + channels
};

std::vector<LayerSlice> embedding_layout(const TransferNetConfig& config);
std::size_t embedding_dim(const TransferNetConfig& config);

std::vector<NormParams> slice_embedding(const StyleEmbedding& s, const TransferNetConfig& config);
StyleEmbedding concat_norm_params(const std::vector<NormParams>& params);

// Style image -> embedding predictor: strided conv backbone, per-channel
// spatial mean pooling, then two linear layers through a low-dimensional
// bottleneck.
struct PredictionNetConfig {
    std::vector<std::size_t> backbone_channels = {8, 16, 32};
    std::size_t backbone_kernel = 3;
    std::size_t backbone_stride = 2;
    std::size_t bottleneck_dim = 16;
    std::size_t output_dim = 0;  // == embedding_dim of the paired transfer net

    static PredictionNetConfig desk(const TransferNetConfig& transfer);
    static PredictionNetConfig full(const TransferNetConfig& transfer);

    std::size_t pooled_dim() const { return backbone_channels.empty() ? 0 : backbone_channels.back(); }
    void validate() const;
};

using ModelParams = std::map<std::string, Tensor>;
using VarMap = std::map<std::string, Var>;

ModelParams init_transfer_params(const TransferNetConfig& config, Rng& rng, double sigma);
// The output-layer bias is initialized to 1 at gamma positions (and 0 at
// beta positions) of `transfer`'s embedding layout, so fresh embeddings
// scale activations by ~1 instead of silencing every normalized layer.
ModelParams init_prediction_params(const PredictionNetConfig& config, const TransferNetConfig& transfer, Rng& rng,
                                   double sigma);

VarMap param_leaves(Tape& tape, const ModelParams& params);

// Renders a content image under the style embedding. Content spatial dims
// must be divisible by the stride product; output dims equal input dims and
// values lie strictly in (0,1).
Var transfer_forward(Tape& tape, Var content, Var embedding, const VarMap& params,
                     const TransferNetConfig& config);
Tensor transfer_forward(const Tensor& content, const StyleEmbedding& s, const ModelParams& params,
                        const TransferNetConfig& config);

Var predict_embedding(Tape& tape, Var style, const VarMap& params, const PredictionNetConfig& config);
StyleEmbedding predict_embedding(const Tensor& style, const ModelParams& params,
                                 const PredictionNetConfig& config);

// The compressed internal representation (the layer the embedding is
// predicted from); the usual input for 2-d map visualizations.
Tensor predict_bottleneck(const Tensor& style, const ModelParams& params, const PredictionNetConfig& config);

}  // namespace nst
