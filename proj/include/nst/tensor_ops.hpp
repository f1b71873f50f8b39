#pragma once

#include <cstddef>

#include "nst/tensor.hpp"

namespace nst {

enum class Padding {
    kSameReflect,  // reflect-pad by (k-1)/2, output dims ceil(dim/stride)
    kValid,
};

// 2-d convolution over [N,C,H,W] with kernel [K,C,kh,kw] and optional bias
// [K] (pass an empty tensor for no bias). Same-reflect padding requires odd
// kernel extents and pad < dim.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, Padding padding);

// Valid convolution pieces, exposed for the autodiff tape.
Tensor conv2d_valid(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                    std::size_t stride);
void conv2d_valid_backward(const Tensor& input, const Tensor& kernel, std::size_t stride,
                           const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel,
                           Tensor* grad_bias);

// Reflect padding of the two spatial axes. Pads must be strictly smaller
// than the padded dimension (single reflection, boundary sample not repeated).
Tensor reflect_pad(const Tensor& input, std::size_t top, std::size_t bottom,
                   std::size_t left, std::size_t right);
void reflect_pad_backward(const Shape& input_shape, std::size_t top, std::size_t bottom,
                          std::size_t left, std::size_t right, const Tensor& grad_out,
                          Tensor* grad_input);

Tensor center_crop(const Tensor& input, std::size_t top, std::size_t bottom,
                   std::size_t left, std::size_t right);

Tensor upsample_nearest(const Tensor& input, std::size_t factor);
void upsample_nearest_backward(const Shape& input_shape, std::size_t factor,
                               const Tensor& grad_out, Tensor* grad_input);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Equal-shape or scalar-and-tensor elementwise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

struct Moments {
    Tensor mean;    // [N,C]
    Tensor stddev;  // [N,C], population (divide by H*W)
};

// Per-(sample, channel) mean and population standard deviation over the
// spatial axes of [N,C,H,W].
Moments spatial_moments(const Tensor& input);

Tensor spatial_mean(const Tensor& input);  // [N,C,H,W] -> [N,C]

}  // namespace nst
