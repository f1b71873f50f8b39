#include "nst/normalization.hpp"

#include <stdexcept>

namespace nst {

namespace {

void check_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.rank() != 4) {
        throw std::invalid_argument("instance norm input must be [N,C,H,W], got " + shape_str(x.shape()));
    }
    const std::size_t c = x.extent(1);
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.extent(0) != c || beta.extent(0) != c) {
        throw std::invalid_argument("norm params must be [" + std::to_string(c) + "] vectors, got gamma " +
                                    shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
    }
}

}  // namespace

Var conditional_instance_norm(Var x, Var gamma, Var beta, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("instance norm eps must be positive");
    Tape* t = x.tape;
    const Tensor& xv = t->value(x);
    check_channels(xv, t->value(gamma), t->value(beta));
    const std::size_t n = xv.extent(0), h = xv.extent(2), w = xv.extent(3);

    Var mu = spatial_mean(x);
    Var centered = sub(x, broadcast_spatial(mu, h, w));
    Var variance = spatial_mean(mul(centered, centered));
    Var inv_std = rsqrt(add_scalar(variance, eps));
    Var normalized = mul(centered, broadcast_spatial(inv_std, h, w));
    Var scaled = mul(normalized, broadcast_channels(gamma, n, h, w));
    return add(scaled, broadcast_channels(beta, n, h, w));
}

Tensor conditional_instance_norm(const Tensor& x, const NormParams& params, double eps) {
    Tape tape;
    Var out = conditional_instance_norm(tape.leaf(x), tape.leaf(params.gamma), tape.leaf(params.beta), eps);
    return tape.value(out);
}

NormParams adain_params(const Tensor& style_features) {
    if (style_features.rank() != 4 || style_features.extent(0) != 1) {
        throw std::invalid_argument("adain_params expects a single style sample [1,C,H,W], got " +
                                    shape_str(style_features.shape()));
    }
    const Moments m = spatial_moments(style_features);
    const std::size_t c = style_features.extent(1);
    NormParams p;
    p.gamma = Tensor(Shape{c});
    p.beta = Tensor(Shape{c});
    for (std::size_t i = 0; i < c; ++i) {
        p.gamma[i] = m.stddev.at2(0, i);
        p.beta[i] = m.mean.at2(0, i);
    }
    return p;
}

Tensor adain_transfer(const Tensor& content_features, const Tensor& style_features, double eps) {
    if (content_features.rank() != 4 || style_features.rank() != 4 ||
        content_features.extent(1) != style_features.extent(1)) {
        throw std::invalid_argument("adain_transfer channel mismatch: " + shape_str(content_features.shape()) +
                                    " vs " + shape_str(style_features.shape()));
    }
    return conditional_instance_norm(content_features, adain_params(style_features), eps);
}

}  // namespace nst
