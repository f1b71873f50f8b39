#pragma once

#include <string>

#include "nst/autodiff.hpp"
#include "nst/tensor.hpp"

namespace nst {

// Epsilon added to the spatial variance before the square root.
inline constexpr double kInstanceNormEps = 1e-5;

// Learned per-channel scale/shift pair following one convolution.
struct NormParams {
    Tensor gamma;  // [C]
    Tensor beta;   // [C]
    std::string layer_id;
};

// Normalizes each (sample, channel) plane to zero mean / unit variance over
// the spatial axes, then applies the per-channel affine gamma, beta.
Tensor conditional_instance_norm(const Tensor& x, const NormParams& params, double eps = kInstanceNormEps);
Var conditional_instance_norm(Var x, Var gamma, Var beta, double eps = kInstanceNormEps);

// Per-channel spatial mean/std of a single style feature map, packaged as
// normalization parameters (beta = mean, gamma = population std; gamma may
// be zero for constant channels).
NormParams adain_params(const Tensor& style_features);

// Re-normalizes content features to carry the style features' per-channel
// spatial statistics.
Tensor adain_transfer(const Tensor& content_features, const Tensor& style_features,
                      double eps = kInstanceNormEps);

}  // namespace nst
