#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nst/autodiff.hpp"
#include "nst/tensor.hpp"

namespace nst {

struct LossLayerSpec {
    std::size_t channels = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    bool relu = true;
};

// Fixed (non-trainable) convolutional feature extractor. Weights are a pure
// function of the seed: two constructions with equal seed and architecture
// are bitwise identical. Style layers sit below content layers.
class LossNetwork {
public:
    static LossNetwork make(std::uint64_t seed);
    static LossNetwork make(std::uint64_t seed, std::vector<LossLayerSpec> layers,
                            std::vector<std::size_t> style_layers, std::vector<std::size_t> content_layers,
                            double init_sigma = 0.3);

    const std::vector<LossLayerSpec>& layers() const { return layers_; }
    const std::vector<std::size_t>& style_layers() const { return style_layers_; }
    const std::vector<std::size_t>& content_layers() const { return content_layers_; }
    std::uint64_t seed() const { return seed_; }
    std::string layer_name(std::size_t i) const { return "conv" + std::to_string(i + 1); }

    // Activations after every layer, in depth order.
    std::vector<Var> features(Tape& tape, Var image) const;
    std::vector<Tensor> features(const Tensor& image) const;

    // Activations up to and including the deepest style layer (the encoder
    // used by the statistics-matching baseline).
    Tensor encode_to_deepest_style_layer(const Tensor& image) const;
    std::size_t deepest_style_layer() const;

private:
    std::vector<LossLayerSpec> layers_;
    std::vector<Tensor> kernels_;
    std::vector<Tensor> biases_;
    std::vector<std::size_t> style_layers_;    // indices into layers_
    std::vector<std::size_t> content_layers_;  // indices into layers_
    std::uint64_t seed_ = 0;
};

struct LossReport {
    double content_loss = 0.0;
    double style_loss = 0.0;
    double total = 0.0;  // content_loss + lambda_s * style_loss, as computed
    std::map<std::string, double> per_layer;
    double lambda_s = 0.0;
};

// Spatially averaged channel-channel correlation matrix:
// G[i][j] = (1/(H*W)) * sum_p f_i(p) f_j(p). Symmetric, PSD.
Tensor gram_matrix(const Tensor& features);
Var gram_matrix(Var features);

// Sum over style layers of ||G[f_i(x)] - G[f_i(s)]||_F^2 / n_i, where n_i
// counts the units (C*H*W) of layer i.
double style_loss(const Tensor& x, const Tensor& s, const LossNetwork& net);
// Sum over content layers of ||f_j(x) - f_j(c)||_2^2 / n_j.
double content_loss(const Tensor& x, const Tensor& c, const LossNetwork& net);
LossReport total_loss(const Tensor& x, const Tensor& c, const Tensor& s, const LossNetwork& net, double lambda_s);

// Tape variants; gradients flow through `x` only. The optional report
// receives the same per-layer values the plain variants compute.
Var style_loss_v(Tape& tape, Var x, const Tensor& s, const LossNetwork& net, LossReport* report = nullptr);
Var content_loss_v(Tape& tape, Var x, const Tensor& c, const LossNetwork& net, LossReport* report = nullptr);
Var total_loss_v(Tape& tape, Var x, const Tensor& c, const Tensor& s, const LossNetwork& net, double lambda_s,
                 LossReport* report = nullptr);

}  // namespace nst
