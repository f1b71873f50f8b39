#include "nst/tensor_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nst {

namespace {

void require_rank4(const Tensor& t, const char* what) {
    if (t.rank() != 4) {
        throw std::invalid_argument(std::string(what) + " must be rank 4, got " + shape_str(t.shape()));
    }
}

// Single-reflection mirror of index i into [0, n). Valid for -n < i < 2n-1.
inline std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) i = -i;
    const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
    if (i >= sn) i = 2 * sn - 2 - i;
    return static_cast<std::size_t>(i);
}

}  // namespace

Tensor conv2d_valid(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride) {
    require_rank4(input, "conv2d input");
    require_rank4(kernel, "conv2d kernel");
    if (stride == 0) throw std::invalid_argument("conv2d stride must be positive");
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    const std::size_t k = kernel.extent(0), kc = kernel.extent(1), kh = kernel.extent(2), kw = kernel.extent(3);
    if (kc != c) {
        throw std::invalid_argument("conv2d kernel expects " + std::to_string(kc) + " input channels, input has " +
                                    std::to_string(c));
    }
    if (kh > h || kw > w) {
        throw std::invalid_argument("conv2d kernel " + shape_str(kernel.shape()) + " does not fit input " +
                                    shape_str(input.shape()));
    }
    if (!bias.empty() && (bias.rank() != 1 || bias.extent(0) != k)) {
        throw std::invalid_argument("conv2d bias must be [" + std::to_string(k) + "], got " + shape_str(bias.shape()));
    }
    const std::size_t oh = (h - kh) / stride + 1;
    const std::size_t ow = (w - kw) / stride + 1;

    Tensor out(Shape{n, k, oh, ow});
    const double* in = input.data();
    const double* ker = kernel.data();
    double* o = out.data();
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ok = 0; ok < k; ++ok) {
            double* oplane = o + (in_ * k + ok) * oh * ow;
            const double b = bias.empty() ? 0.0 : bias[ok];
            for (std::size_t i = 0; i < oh * ow; ++i) oplane[i] = b;
            for (std::size_t ic = 0; ic < c; ++ic) {
                const double* iplane = in + (in_ * c + ic) * h * w;
                const double* kplane = ker + (ok * c + ic) * kh * kw;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const double kv = kplane[ky * kw + kx];
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const double* irow = iplane + (oy * stride + ky) * w + kx;
                            double* orow = oplane + oy * ow;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                orow[ox] += kv * irow[ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_valid_backward(const Tensor& input, const Tensor& kernel, std::size_t stride, const Tensor& grad_out,
                           Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias) {
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    const std::size_t k = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
    const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);

    const double* in = input.data();
    const double* ker = kernel.data();
    const double* go = grad_out.data();
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ok = 0; ok < k; ++ok) {
            const double* gplane = go + (in_ * k + ok) * oh * ow;
            if (grad_bias) {
                double s = 0.0;
                for (std::size_t i = 0; i < oh * ow; ++i) s += gplane[i];
                (*grad_bias)[ok] += s;
            }
            for (std::size_t ic = 0; ic < c; ++ic) {
                const double* iplane = in + (in_ * c + ic) * h * w;
                const double* kplane = ker + (ok * c + ic) * kh * kw;
                double* giplane = grad_input ? grad_input->data() + (in_ * c + ic) * h * w : nullptr;
                double* gkplane = grad_kernel ? grad_kernel->data() + (ok * c + ic) * kh * kw : nullptr;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const double kv = kplane[ky * kw + kx];
                        double gk = 0.0;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const std::size_t iy = oy * stride + ky;
                            const double* grow = gplane + oy * ow;
                            const double* irow = iplane + iy * w + kx;
                            double* girow = giplane ? giplane + iy * w + kx : nullptr;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const double g = grow[ox];
                                gk += g * irow[ox * stride];
                                if (girow) girow[ox * stride] += g * kv;
                            }
                        }
                        if (gkplane) gkplane[ky * kw + kx] += gk;
                    }
                }
            }
        }
    }
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride, Padding padding) {
    if (padding == Padding::kValid) {
        return conv2d_valid(input, kernel, bias, stride);
    }
    require_rank4(kernel, "conv2d kernel");
    const std::size_t kh = kernel.extent(2), kw = kernel.extent(3);
    if (kh % 2 == 0 || kw % 2 == 0) {
        throw std::invalid_argument("same-reflect conv2d requires odd kernel extents, got " +
                                    shape_str(kernel.shape()));
    }
    const Tensor padded = reflect_pad(input, (kh - 1) / 2, (kh - 1) / 2, (kw - 1) / 2, (kw - 1) / 2);
    return conv2d_valid(padded, kernel, bias, stride);
}

Tensor reflect_pad(const Tensor& input, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
    require_rank4(input, "reflect_pad input");
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    if (top >= h || bottom >= h || left >= w || right >= w) {
        throw std::invalid_argument("reflect_pad pads (" + std::to_string(top) + "," + std::to_string(bottom) + "," +
                                    std::to_string(left) + "," + std::to_string(right) +
                                    ") must be smaller than spatial dims of " + shape_str(input.shape()));
    }
    const std::size_t oh = h + top + bottom, ow = w + left + right;
    Tensor out(Shape{n, c, oh, ow});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::size_t iy = mirror(static_cast<std::ptrdiff_t>(oy) - static_cast<std::ptrdiff_t>(top), h);
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t ix =
                        mirror(static_cast<std::ptrdiff_t>(ox) - static_cast<std::ptrdiff_t>(left), w);
                    out.at(in_, ic, oy, ox) = input.at(in_, ic, iy, ix);
                }
            }
        }
    }
    return out;
}

void reflect_pad_backward(const Shape& input_shape, std::size_t top, std::size_t bottom, std::size_t left,
                          std::size_t right, const Tensor& grad_out, Tensor* grad_input) {
    const std::size_t n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    const std::size_t oh = h + top + bottom, ow = w + left + right;
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::size_t iy = mirror(static_cast<std::ptrdiff_t>(oy) - static_cast<std::ptrdiff_t>(top), h);
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t ix =
                        mirror(static_cast<std::ptrdiff_t>(ox) - static_cast<std::ptrdiff_t>(left), w);
                    grad_input->at(in_, ic, iy, ix) += grad_out.at(in_, ic, oy, ox);
                }
            }
        }
    }
}

Tensor center_crop(const Tensor& input, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
    require_rank4(input, "center_crop input");
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    if (top + bottom >= h || left + right >= w) {
        throw std::invalid_argument("center_crop extents exceed input " + shape_str(input.shape()));
    }
    const std::size_t oh = h - top - bottom, ow = w - left - right;
    Tensor out(Shape{n, c, oh, ow});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    out.at(in_, ic, oy, ox) = input.at(in_, ic, oy + top, ox + left);
                }
            }
        }
    }
    return out;
}

Tensor upsample_nearest(const Tensor& input, std::size_t factor) {
    require_rank4(input, "upsample_nearest input");
    if (factor == 0) throw std::invalid_argument("upsample_nearest factor must be positive");
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    Tensor out(Shape{n, c, h * factor, w * factor});
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t oy = 0; oy < h * factor; ++oy) {
                for (std::size_t ox = 0; ox < w * factor; ++ox) {
                    out.at(in_, ic, oy, ox) = input.at(in_, ic, oy / factor, ox / factor);
                }
            }
        }
    }
    return out;
}

void upsample_nearest_backward(const Shape& input_shape, std::size_t factor, const Tensor& grad_out,
                               Tensor* grad_input) {
    const std::size_t n = input_shape[0], c = input_shape[1], h = input_shape[2], w = input_shape[3];
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t oy = 0; oy < h * factor; ++oy) {
                for (std::size_t ox = 0; ox < w * factor; ++ox) {
                    grad_input->at(in_, ic, oy / factor, ox / factor) += grad_out.at(in_, ic, oy, ox);
                }
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    return out;
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
    auto apply = [op](double x, double y) {
        switch (op) {
            case BinOp::kAdd: return x + y;
            case BinOp::kSub: return x - y;
            default: return x * y;
        }
    };
    if (a.same_shape(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(a[i], b[i]);
        return out;
    }
    if (b.size() == 1) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(a[i], b[0]);
        return out;
    }
    if (a.size() == 1) {
        Tensor out = b;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(a[0], b[i]);
        return out;
    }
    throw std::invalid_argument("elementwise op requires equal shapes or a scalar operand, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul); }

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
    return out;
}

Tensor spatial_mean(const Tensor& input) {
    require_rank4(input, "spatial_mean input");
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    if (h * w == 0) throw std::invalid_argument("spatial_mean requires H*W >= 1");
    Tensor out(Shape{n, c});
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            const double* plane = input.data() + (in_ * c + ic) * h * w;
            double s = 0.0;
            for (std::size_t i = 0; i < h * w; ++i) s += plane[i];
            out.at2(in_, ic) = s * inv;
        }
    }
    return out;
}

Moments spatial_moments(const Tensor& input) {
    Moments m;
    m.mean = spatial_mean(input);
    const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
    m.stddev = Tensor(Shape{n, c});
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t in_ = 0; in_ < n; ++in_) {
        for (std::size_t ic = 0; ic < c; ++ic) {
            const double* plane = input.data() + (in_ * c + ic) * h * w;
            const double mu = m.mean.at2(in_, ic);
            double s = 0.0;
            for (std::size_t i = 0; i < h * w; ++i) {
                const double d = plane[i] - mu;
                s += d * d;
            }
            m.stddev.at2(in_, ic) = std::sqrt(s * inv);
        }
    }
    return m;
}

}  // namespace nst
