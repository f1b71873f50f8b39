#include "nst/losses.hpp"

#include <algorithm>
#include <stdexcept>

#include "nst/rng.hpp"

namespace nst {

LossNetwork LossNetwork::make(std::uint64_t seed) {
    return make(seed,
                {LossLayerSpec{8, 3, 1, true}, LossLayerSpec{16, 3, 2, true}, LossLayerSpec{16, 3, 1, true},
                 LossLayerSpec{32, 3, 2, true}},
                {0, 1, 2}, {3});
}

LossNetwork LossNetwork::make(std::uint64_t seed, std::vector<LossLayerSpec> layers,
                              std::vector<std::size_t> style_layers, std::vector<std::size_t> content_layers,
                              double init_sigma) {
    if (layers.empty()) throw std::invalid_argument("loss network needs at least one layer");
    for (std::size_t i : style_layers) {
        if (i >= layers.size()) throw std::invalid_argument("style layer index out of range");
    }
    for (std::size_t j : content_layers) {
        if (j >= layers.size()) throw std::invalid_argument("content layer index out of range");
    }
    if (!style_layers.empty() && !content_layers.empty()) {
        const std::size_t deepest_style = *std::max_element(style_layers.begin(), style_layers.end());
        const std::size_t shallowest_content = *std::min_element(content_layers.begin(), content_layers.end());
        if (deepest_style > shallowest_content) {
            throw std::invalid_argument("style layers must not sit above content layers");
        }
    }

    LossNetwork net;
    net.layers_ = std::move(layers);
    net.style_layers_ = std::move(style_layers);
    net.content_layers_ = std::move(content_layers);
    net.seed_ = seed;

    Rng rng(seed);
    std::size_t in_channels = 3;
    for (const LossLayerSpec& spec : net.layers_) {
        net.kernels_.push_back(rng.normal_tensor(Shape{spec.channels, in_channels, spec.kernel, spec.kernel},
                                                 init_sigma));
        net.biases_.push_back(Tensor(Shape{spec.channels}));
        in_channels = spec.channels;
    }
    return net;
}

std::vector<Var> LossNetwork::features(Tape& tape, Var image) const {
    std::vector<Var> feats;
    feats.reserve(layers_.size());
    Var x = image;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Var k = tape.leaf(kernels_[i]);
        Var b = tape.leaf(biases_[i]);
        x = conv2d(x, k, b, layers_[i].stride, Padding::kSameReflect);
        if (layers_[i].relu) x = relu(x);
        feats.push_back(x);
    }
    return feats;
}

std::vector<Tensor> LossNetwork::features(const Tensor& image) const {
    Tape tape;
    std::vector<Var> vars = features(tape, tape.leaf(image));
    std::vector<Tensor> out;
    out.reserve(vars.size());
    for (Var v : vars) out.push_back(tape.value(v));
    return out;
}

std::size_t LossNetwork::deepest_style_layer() const {
    if (style_layers_.empty()) throw std::logic_error("loss network has no style layers");
    return *std::max_element(style_layers_.begin(), style_layers_.end());
}

Tensor LossNetwork::encode_to_deepest_style_layer(const Tensor& image) const {
    return features(image)[deepest_style_layer()];
}

namespace {

Tensor gram_forward(const Tensor& f) {
    if (f.rank() != 4) throw std::invalid_argument("gram_matrix expects [N,C,H,W], got " + shape_str(f.shape()));
    const std::size_t n = f.extent(0), c = f.extent(1), h = f.extent(2), w = f.extent(3);
    if (h * w == 0) throw std::invalid_argument("gram_matrix requires H*W >= 1");
    const double inv = 1.0 / static_cast<double>(h * w);
    Tensor g(Shape{n, c, c});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t i = 0; i < c; ++i) {
            const double* fi = f.data() + (in_ * c + i) * h * w;
            for (std::size_t j = i; j < c; ++j) {
                const double* fj = f.data() + (in_ * c + j) * h * w;
                double s = 0.0;
                for (std::size_t p = 0; p < h * w; ++p) s += fi[p] * fj[p];
                const double v = s * inv;
                g[(in_ * c + i) * c + j] = v;
                g[(in_ * c + j) * c + i] = v;
            }
        }
    }
    return g;
}

}  // namespace

Tensor gram_matrix(const Tensor& features) { return gram_forward(features); }

Var gram_matrix(Var features) {
    Tape* t = features.tape;
    Tensor out = gram_forward(t->value(features));
    auto back = [](Tape& tp, int self) {
        const int p = tp.parents(self)[0];
        const Tensor& f = tp.node_value(p);
        const Tensor& g = tp.grad_buffer(self);
        Tensor& gf = tp.grad_buffer(p);
        const std::size_t n = f.extent(0), c = f.extent(1), h = f.extent(2), w = f.extent(3);
        const double inv = 1.0 / static_cast<double>(h * w);
        for (std::size_t in_ = 0; in_ < n; ++in_) {
            for (std::size_t i = 0; i < c; ++i) {
                double* gfi = gf.data() + (in_ * c + i) * h * w;
                for (std::size_t j = 0; j < c; ++j) {
                    const double m = (g[(in_ * c + i) * c + j] + g[(in_ * c + j) * c + i]) * inv;
                    if (m == 0.0) continue;
                    const double* fj = f.data() + (in_ * c + j) * h * w;
                    for (std::size_t pidx = 0; pidx < h * w; ++pidx) gfi[pidx] += m * fj[pidx];
                }
            }
        }
    };
    return t->emit(std::move(out), {features}, back);
}

namespace {

std::size_t layer_units(const Tensor& feature) {
    return feature.extent(1) * feature.extent(2) * feature.extent(3);
}

Var squared_frobenius(Var x) { return sum(mul(x, x)); }

}  // namespace

Var style_loss_v(Tape& tape, Var x, const Tensor& s, const LossNetwork& net, LossReport* report) {
    const std::vector<Tensor> target_feats = net.features(s);
    const std::vector<Var> x_feats = net.features(tape, x);
    Var total = tape.leaf(Tensor::scalar(0.0));
    for (std::size_t i : net.style_layers()) {
        Var gx = gram_matrix(x_feats[i]);
        Var gs = tape.leaf(gram_matrix(target_feats[i]));
        Var diff = sub(gx, gs);
        const double weight = 1.0 / static_cast<double>(layer_units(tape.value(x_feats[i])));
        Var term = scale(squared_frobenius(diff), weight);
        if (report) report->per_layer["style/" + net.layer_name(i)] = tape.value(term).item();
        total = add(total, term);
    }
    return total;
}

Var content_loss_v(Tape& tape, Var x, const Tensor& c, const LossNetwork& net, LossReport* report) {
    const Tensor& xv = tape.value(x);
    if (xv.extent(2) != c.extent(2) || xv.extent(3) != c.extent(3)) {
        throw std::invalid_argument("content_loss requires equal spatial dims, got " + shape_str(xv.shape()) +
                                    " vs " + shape_str(c.shape()));
    }
    const std::vector<Tensor> target_feats = net.features(c);
    const std::vector<Var> x_feats = net.features(tape, x);
    Var total = tape.leaf(Tensor::scalar(0.0));
    for (std::size_t j : net.content_layers()) {
        Var diff = sub(x_feats[j], tape.leaf(target_feats[j]));
        const double weight = 1.0 / static_cast<double>(layer_units(tape.value(x_feats[j])));
        Var term = scale(squared_frobenius(diff), weight);
        if (report) report->per_layer["content/" + net.layer_name(j)] = tape.value(term).item();
        total = add(total, term);
    }
    return total;
}

Var total_loss_v(Tape& tape, Var x, const Tensor& c, const Tensor& s, const LossNetwork& net, double lambda_s,
                 LossReport* report) {
    if (!(lambda_s > 0.0)) throw std::invalid_argument("lambda_s must be positive");
    Var content = content_loss_v(tape, x, c, net, report);
    Var style = style_loss_v(tape, x, s, net, report);
    Var total = add(content, scale(style, lambda_s));
    if (report) {
        report->content_loss = tape.value(content).item();
        report->style_loss = tape.value(style).item();
        report->total = tape.value(total).item();
        report->lambda_s = lambda_s;
    }
    return total;
}

double style_loss(const Tensor& x, const Tensor& s, const LossNetwork& net) {
    Tape tape;
    return tape.value(style_loss_v(tape, tape.leaf(x), s, net)).item();
}

double content_loss(const Tensor& x, const Tensor& c, const LossNetwork& net) {
    Tape tape;
    return tape.value(content_loss_v(tape, tape.leaf(x), c, net)).item();
}

LossReport total_loss(const Tensor& x, const Tensor& c, const Tensor& s, const LossNetwork& net, double lambda_s) {
    Tape tape;
    LossReport report;
    total_loss_v(tape, tape.leaf(x), c, s, net, lambda_s, &report);
    return report;
}

}  // namespace nst
