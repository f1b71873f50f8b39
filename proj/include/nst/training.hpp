#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nst/config.hpp"
#include "nst/image_io.hpp"
#include "nst/losses.hpp"
#include "nst/networks.hpp"
#include "nst/rng.hpp"
#include "nst/tensor.hpp"

namespace nst {

struct AdamConfig {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::uint64_t step = 0;
};

// Bias-corrected Adam step over every named parameter. Moments are created
// lazily with the parameter shapes. Throws on a non-finite gradient, naming
// the parameter, before touching any state.
void adam_update(ModelParams& params, const std::map<std::string, Tensor>& grads, AdamState& state);

struct AugmentConfig {
    bool enabled = true;
    double flip_prob = 0.5;
    double rescale_min = 0.8;
    double rescale_max = 1.2;
    double hue_max_rad = 0.1;
    double contrast_min = 0.8;
    double contrast_max = 1.2;
};

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

// Horizontal flip, uniform rescale + crop back to the original dims
// (reflect-padded if the rescale shrank the image), hue rotation about the
// gray axis, contrast scale about the image mean, final clamp to [0,1].
// Fully determined by the rng state; disabled -> identity.
Tensor augment_style(const Tensor& image, const AugmentConfig& cfg, Rng& rng);

struct TraceRow {
    std::uint64_t step = 0;
    double content_loss = 0.0;
    double style_loss = 0.0;
    double total = 0.0;
};

std::string trace_csv_header();
std::string trace_csv_row(const TraceRow& row);

struct TrainResult {
    RunConfig config;  // input config with style_corpus_hashes recorded
    ModelParams params;
    AdamState adam;
    std::vector<TraceRow> trace;
};

// Joint optimization of the style prediction and transfer networks: each
// step samples a content and a style batch, augments the styles, renders
// T(c, P(s)) and descends the combined objective through both networks.
TrainResult train_joint(const RunConfig& config, const Corpus& contents, const Corpus& styles);

// Statistics-matching baseline: a fixed encoder (the loss network truncated
// at its deepest style layer) plus a trainable decoder; the style enters
// only through the per-channel feature statistics.
TrainResult train_adain_baseline(const RunConfig& config, const Corpus& contents, const Corpus& styles);

// Decoder layer plan derived by mirroring the truncated encoder.
struct DecoderSpec {
    std::vector<LossLayerSpec> layers;   // stride reinterpreted as upsample factor
};
DecoderSpec adain_decoder_spec(const LossNetwork& net);
Var decoder_forward(Tape& tape, Var features, const VarMap& params, const DecoderSpec& spec);
Tensor adain_stylize(const Tensor& content, const Tensor& style, const LossNetwork& net, const ModelParams& decoder);

struct OptimizeResult {
    Tensor best_image;
    LossReport best_report;
    std::size_t best_step = 0;  // 0 = the initial image
    std::vector<TraceRow> trace;
};

// Direct pixel-space descent of the combined objective, starting from the
// content image, pixels clamped to [0,1] after every step. Returns the
// best-loss iterate, so the reported loss never exceeds the initial one.
OptimizeResult direct_optimize(const Tensor& content, const Tensor& style, const LossNetwork& net, double lambda_s,
                               std::size_t steps, const AdamConfig& adam);

// RunConfig views used across the tools.
TransferNetConfig transfer_config(const RunConfig& cfg);
PredictionNetConfig prediction_config(const RunConfig& cfg);
AdamConfig adam_config(const RunConfig& cfg);
AugmentConfig augment_config(const RunConfig& cfg);
LossNetwork loss_network(const RunConfig& cfg);

}  // namespace nst
