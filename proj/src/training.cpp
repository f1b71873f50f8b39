#include "nst/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nst/normalization.hpp"

namespace nst {

void adam_update(ModelParams& params, const std::map<std::string, Tensor>& grads, AdamState& state) {
    for (const auto& [name, grad] : grads) {
        if (!grad.all_finite()) {
            throw std::runtime_error("non-finite gradient for parameter '" + name + "'");
        }
    }
    const AdamConfig& c = state.config;
    const std::uint64_t t = ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (auto& [name, param] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw std::invalid_argument("missing gradient for parameter '" + name + "'");
        const Tensor& g = git->second;
        if (!g.same_shape(param)) {
            throw std::invalid_argument("gradient shape mismatch for '" + name + "': " + shape_str(g.shape()) +
                                        " vs " + shape_str(param.shape()));
        }
        Tensor& m = state.m.try_emplace(name, Tensor(param.shape())).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(param.shape())).first->second;
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            param[i] -= c.alpha * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (image.rank() != 4) throw std::invalid_argument("resize_bilinear expects [N,C,H,W]");
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear target dims must be positive");
    const std::size_t n = image.extent(0), c = image.extent(1), h = image.extent(2), w = image.extent(3);
    Tensor out(Shape{n, c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const double fy = std::max(0.0, (static_cast<double>(oy) + 0.5) * sy - 0.5);
        const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 1);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double fx = std::max(0.0, (static_cast<double>(ox) + 0.5) * sx - 0.5);
            const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 1);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t in_ = 0; in_ < n; ++in_) {
                for (std::size_t ic = 0; ic < c; ++ic) {
                    const double a = image.at(in_, ic, y0, x0), b = image.at(in_, ic, y0, x1);
                    const double d = image.at(in_, ic, y1, x0), e = image.at(in_, ic, y1, x1);
                    out.at(in_, ic, oy, ox) = (1.0 - wy) * ((1.0 - wx) * a + wx * b) +
                                              wy * ((1.0 - wx) * d + wx * e);
                }
            }
        }
    }
    return out;
}

namespace {

Tensor flip_horizontal(const Tensor& image) {
    const std::size_t n = image.extent(0), c = image.extent(1), h = image.extent(2), w = image.extent(3);
    Tensor out(image.shape());
    for (std::size_t in_ = 0; in_ < n; ++in_)
        for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) out.at(in_, ic, y, x) = image.at(in_, ic, y, w - 1 - x);
    return out;
}

// Pads one spatial axis up to `target` by reflection, split evenly.
Tensor pad_axis_to(const Tensor& image, std::size_t target, bool rows) {
    const std::size_t cur = rows ? image.extent(2) : image.extent(3);
    if (cur >= target) return image;
    const std::size_t total = target - cur;
    const std::size_t before = total / 2, after = total - before;
    return rows ? reflect_pad(image, before, after, 0, 0) : reflect_pad(image, 0, 0, before, after);
}

Tensor crop_window(const Tensor& image, std::size_t oy, std::size_t ox, std::size_t h, std::size_t w) {
    Tensor out(Shape{image.extent(0), image.extent(1), h, w});
    for (std::size_t n = 0; n < image.extent(0); ++n)
        for (std::size_t c = 0; c < image.extent(1); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) out.at(n, c, y, x) = image.at(n, c, oy + y, ox + x);
    return out;
}

// Rotation of RGB vectors about the gray axis (1,1,1)/sqrt(3).
void rotate_hue(Tensor& image, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double k = 1.0 / std::sqrt(3.0);
    // Rodrigues formula for axis a = (k,k,k): R = c*I + s*[a]_x + (1-c)*aa^T
    const double aa = (1.0 - c) / 3.0;
    const double r[3][3] = {
        {c + aa, aa - s * k, aa + s * k},
        {aa + s * k, c + aa, aa - s * k},
        {aa - s * k, aa + s * k, c + aa},
    };
    const std::size_t h = image.extent(2), w = image.extent(3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double in[3] = {image.at(0, 0, y, x), image.at(0, 1, y, x), image.at(0, 2, y, x)};
            for (std::size_t ch = 0; ch < 3; ++ch) {
                image.at(0, ch, y, x) = r[ch][0] * in[0] + r[ch][1] * in[1] + r[ch][2] * in[2];
            }
        }
    }
}

}  // namespace

Tensor augment_style(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
    if (image.rank() != 4 || image.extent(0) != 1 || image.extent(1) != 3) {
        throw std::invalid_argument("augment_style expects a [1,3,H,W] image");
    }
    if (!cfg.enabled) return image;
    const std::size_t h = image.extent(2), w = image.extent(3);

    Tensor out = image;
    if (rng.uniform() < cfg.flip_prob) out = flip_horizontal(out);

    const double factor = rng.uniform(cfg.rescale_min, cfg.rescale_max);
    const std::size_t nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(factor * h)));
    const std::size_t nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(factor * w)));
    if (nh != h || nw != w) out = resize_bilinear(out, nh, nw);
    out = pad_axis_to(out, h, true);
    out = pad_axis_to(out, w, false);
    const std::size_t oy = rng.integer(out.extent(2) - h + 1);
    const std::size_t ox = rng.integer(out.extent(3) - w + 1);
    out = crop_window(out, oy, ox, h, w);

    const double hue = rng.uniform(-cfg.hue_max_rad, cfg.hue_max_rad);
    if (hue != 0.0) rotate_hue(out, hue);

    const double contrast = rng.uniform(cfg.contrast_min, cfg.contrast_max);
    if (contrast != 1.0) {
        double m = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) m += out[i];
        m /= static_cast<double>(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = m + contrast * (out[i] - m);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    return out;
}

std::string trace_csv_header() { return "step,content_loss,style_loss,total\n"; }

std::string trace_csv_row(const TraceRow& row) {
    std::ostringstream os;
    os << row.step << ',' << format_double(row.content_loss) << ',' << format_double(row.style_loss) << ','
       << format_double(row.total) << '\n';
    return os.str();
}

namespace {

void round_to_f32(Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
}

// Storage-precision emulation for f32 runs: values are computed in doubles
// and rounded to float after each update, so checkpoints round-trip bitwise.
void apply_precision(const RunConfig& cfg, ModelParams& params, AdamState& state) {
    if (cfg.precision != "f32") return;
    for (auto& [name, t] : params) round_to_f32(t);
    for (auto& [name, t] : state.m) round_to_f32(t);
    for (auto& [name, t] : state.v) round_to_f32(t);
}

std::string join_hashes(const std::vector<std::uint64_t>& hashes) {
    std::ostringstream os;
    for (std::size_t i = 0; i < hashes.size(); ++i) {
        if (i) os << ',';
        os << std::hex << hashes[i];
    }
    return os.str();
}

void check_train_inputs(const RunConfig& config, const Corpus& contents, const Corpus& styles) {
    config.validate();
    if (contents.size() == 0) throw std::invalid_argument("content corpus is empty");
    if (styles.size() == 0) throw std::invalid_argument("style corpus is empty");
}

void maybe_trace(std::vector<TraceRow>& trace, const RunConfig& config, std::uint64_t step, double content,
                 double style, double total) {
    if (step == 1 || step == config.budget || (config.trace_every > 0 && step % config.trace_every == 0)) {
        trace.push_back(TraceRow{step, content, style, total});
    }
}

}  // namespace

TransferNetConfig transfer_config(const RunConfig& cfg) {
    TransferNetConfig t;
    t.channels = cfg.transfer_channels;
    t.residual_blocks = cfg.residual_blocks;
    t.validate();
    return t;
}

PredictionNetConfig prediction_config(const RunConfig& cfg) {
    PredictionNetConfig p;
    p.backbone_channels = cfg.pred_backbone_channels;
    p.bottleneck_dim = cfg.pred_bottleneck_dim;
    p.output_dim = embedding_dim(transfer_config(cfg));
    p.validate();
    return p;
}

AdamConfig adam_config(const RunConfig& cfg) {
    return AdamConfig{cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
}

AugmentConfig augment_config(const RunConfig& cfg) {
    AugmentConfig a;
    a.enabled = cfg.augment;
    a.flip_prob = cfg.aug_flip_prob;
    a.rescale_min = cfg.aug_rescale_min;
    a.rescale_max = cfg.aug_rescale_max;
    a.hue_max_rad = cfg.aug_hue_max_rad;
    a.contrast_min = cfg.aug_contrast_min;
    a.contrast_max = cfg.aug_contrast_max;
    return a;
}

LossNetwork loss_network(const RunConfig& cfg) { return LossNetwork::make(cfg.loss_net_seed); }

TrainResult train_joint(const RunConfig& config, const Corpus& contents, const Corpus& styles) {
    check_train_inputs(config, contents, styles);
    const TransferNetConfig tcfg = transfer_config(config);
    const PredictionNetConfig pcfg = prediction_config(config);
    const LossNetwork lossnet = loss_network(config);
    const AugmentConfig aug = augment_config(config);

    Rng rng(config.seed);
    ModelParams params = init_transfer_params(tcfg, rng, config.init_sigma);
    ModelParams pparams = init_prediction_params(pcfg, tcfg, rng, config.init_sigma);
    params.insert(pparams.begin(), pparams.end());

    AdamState state;
    state.config = adam_config(config);

    TrainResult result;
    result.config = config;
    result.config.style_corpus_hashes = join_hashes(styles.hashes);

    const std::size_t batch = config.batch_size;
    for (std::uint64_t step = 1; step <= config.budget; ++step) {
        Tape tape;
        VarMap leaves = param_leaves(tape, params);
        Var batch_loss = tape.leaf(Tensor::scalar(0.0));
        double content_acc = 0.0, style_acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const Tensor& content = contents.images[rng.integer(contents.size())];
            const Tensor& style_src = styles.images[rng.integer(styles.size())];
            const Tensor style = augment_style(style_src, aug, rng);
            Var embedding = predict_embedding(tape, tape.leaf(style), leaves, pcfg);
            Var stylized = transfer_forward(tape, tape.leaf(content), embedding, leaves, tcfg);
            LossReport report;
            Var loss = total_loss_v(tape, stylized, content, style, lossnet, config.lambda_s, &report);
            batch_loss = add(batch_loss, loss);
            content_acc += report.content_loss;
            style_acc += report.style_loss;
        }
        batch_loss = scale(batch_loss, 1.0 / static_cast<double>(batch));
        const double total = tape.value(batch_loss).item();
        if (!std::isfinite(total)) {
            throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        }
        tape.backward(batch_loss);
        std::map<std::string, Tensor> grads;
        for (const auto& [name, leaf] : leaves) grads.emplace(name, tape.grad(leaf));
        adam_update(params, grads, state);
        apply_precision(config, params, state);
        maybe_trace(result.trace, config, step, content_acc / static_cast<double>(batch),
                    style_acc / static_cast<double>(batch), total);
    }
    result.params = std::move(params);
    result.adam = std::move(state);
    return result;
}

DecoderSpec adain_decoder_spec(const LossNetwork& net) {
    const std::size_t deepest = net.deepest_style_layer();
    DecoderSpec spec;
    std::size_t in_c = 3;
    std::vector<std::size_t> inputs;  // input channels of each encoder layer
    for (std::size_t i = 0; i <= deepest; ++i) {
        inputs.push_back(in_c);
        if (net.layers()[i].stride != 1 && net.layers()[i].stride != 2) {
            throw std::invalid_argument("decoder mirroring supports encoder strides 1 and 2 only");
        }
        in_c = net.layers()[i].channels;
    }
    for (std::size_t i = deepest + 1; i-- > 0;) {
        LossLayerSpec layer;
        layer.channels = inputs[i];
        layer.kernel = 3;
        layer.stride = net.layers()[i].stride;  // reinterpreted as upsample factor
        layer.relu = i != 0;                    // final layer carries the sigmoid instead
        spec.layers.push_back(layer);
    }
    return spec;
}

Var decoder_forward(Tape& tape, Var features, const VarMap& params, const DecoderSpec& spec) {
    Var x = features;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const std::string name = "d.conv" + std::to_string(i + 1);
        if (spec.layers[i].stride == 2) x = upsample_nearest(x, 2);
        auto kit = params.find(name + ".k");
        auto bit = params.find(name + ".b");
        if (kit == params.end() || bit == params.end()) {
            throw std::invalid_argument("missing decoder parameter " + name);
        }
        x = conv2d(x, kit->second, bit->second, 1, Padding::kSameReflect);
        x = spec.layers[i].relu ? relu(x) : sigmoid(x);
    }
    return x;
}

Tensor adain_stylize(const Tensor& content, const Tensor& style, const LossNetwork& net, const ModelParams& decoder) {
    const Tensor cf = net.encode_to_deepest_style_layer(content);
    const Tensor sf = net.encode_to_deepest_style_layer(style);
    const Tensor mixed = adain_transfer(cf, sf);
    Tape tape;
    const DecoderSpec spec = adain_decoder_spec(net);
    Var out = decoder_forward(tape, tape.leaf(mixed), param_leaves(tape, decoder), spec);
    return tape.value(out);
}

TrainResult train_adain_baseline(const RunConfig& config, const Corpus& contents, const Corpus& styles) {
    check_train_inputs(config, contents, styles);
    const LossNetwork lossnet = loss_network(config);
    const AugmentConfig aug = augment_config(config);
    const DecoderSpec spec = adain_decoder_spec(lossnet);

    Rng rng(config.seed);
    // He-scaled decoder init; the decoder sees full-magnitude features, so
    // the tiny transfer-net sigma would start it far too quiet.
    ModelParams params;
    std::size_t in_c = lossnet.layers()[lossnet.deepest_style_layer()].channels;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const std::string name = "d.conv" + std::to_string(i + 1);
        const std::size_t out_c = spec.layers[i].channels;
        const double sigma = std::sqrt(2.0 / static_cast<double>(in_c * 9));
        params[name + ".k"] = rng.normal_tensor(Shape{out_c, in_c, 3, 3}, sigma);
        params[name + ".b"] = Tensor(Shape{out_c});
        in_c = out_c;
    }

    AdamState state;
    state.config = adam_config(config);

    TrainResult result;
    result.config = config;
    result.config.model_kind = "adain";
    result.config.style_corpus_hashes = join_hashes(styles.hashes);

    const std::size_t batch = config.batch_size;
    for (std::uint64_t step = 1; step <= config.budget; ++step) {
        Tape tape;
        VarMap leaves = param_leaves(tape, params);
        Var batch_loss = tape.leaf(Tensor::scalar(0.0));
        double content_acc = 0.0, style_acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const Tensor& content = contents.images[rng.integer(contents.size())];
            const Tensor& style_src = styles.images[rng.integer(styles.size())];
            const Tensor style = augment_style(style_src, aug, rng);
            const Tensor cf = lossnet.encode_to_deepest_style_layer(content);
            const Tensor sf = lossnet.encode_to_deepest_style_layer(style);
            const Tensor mixed = adain_transfer(cf, sf);
            Var stylized = decoder_forward(tape, tape.leaf(mixed), leaves, spec);
            LossReport report;
            Var loss = total_loss_v(tape, stylized, content, style, lossnet, config.lambda_s, &report);
            batch_loss = add(batch_loss, loss);
            content_acc += report.content_loss;
            style_acc += report.style_loss;
        }
        batch_loss = scale(batch_loss, 1.0 / static_cast<double>(batch));
        const double total = tape.value(batch_loss).item();
        if (!std::isfinite(total)) {
            throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        }
        tape.backward(batch_loss);
        std::map<std::string, Tensor> grads;
        for (const auto& [name, leaf] : leaves) grads.emplace(name, tape.grad(leaf));
        adam_update(params, grads, state);
        apply_precision(config, params, state);
        maybe_trace(result.trace, config, step, content_acc / static_cast<double>(batch),
                    style_acc / static_cast<double>(batch), total);
    }
    result.params = std::move(params);
    result.adam = std::move(state);
    return result;
}

OptimizeResult direct_optimize(const Tensor& content, const Tensor& style, const LossNetwork& net, double lambda_s,
                               std::size_t steps, const AdamConfig& adam) {
    if (steps < 1) throw std::invalid_argument("direct_optimize needs steps >= 1");
    if (!(lambda_s > 0.0)) throw std::invalid_argument("lambda_s must be positive");

    ModelParams pixels;
    pixels["pixels"] = content;
    AdamState state;
    state.config = adam;

    OptimizeResult result;
    result.best_image = content;
    result.best_step = 0;

    bool have_best = false;
    for (std::size_t step = 0; step <= steps; ++step) {
        Tape tape;
        Var img = tape.leaf(pixels["pixels"]);
        LossReport report;
        Var loss = total_loss_v(tape, img, content, style, net, lambda_s, &report);
        if (!std::isfinite(report.total)) {
            // Abort, keeping the trace collected so far.
            break;
        }
        result.trace.push_back(TraceRow{step, report.content_loss, report.style_loss, report.total});
        if (!have_best || report.total < result.best_report.total) {
            result.best_report = report;
            result.best_image = pixels["pixels"];
            result.best_step = step;
            have_best = true;
        }
        if (step == steps) break;
        tape.backward(loss);
        std::map<std::string, Tensor> grads;
        grads.emplace("pixels", tape.grad(img));
        adam_update(pixels, grads, state);
        Tensor& px = pixels["pixels"];
        for (std::size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(px[i], 0.0, 1.0);
    }
    return result;
}

}  // namespace nst
