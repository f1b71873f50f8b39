#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately written as direct index arithmetic / brute force, separate
// from the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nst/tensor.hpp"

namespace oracle {

using nst::Shape;
using nst::Tensor;

// Mirror index into [0, n) with a single reflection about the boundary sample.
inline std::ptrdiff_t mirror_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

inline Tensor reflect_pad_reference(const Tensor& in, std::size_t top, std::size_t bottom, std::size_t left,
                                    std::size_t right) {
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(in.extent(2));
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(in.extent(3));
    Tensor out(Shape{in.extent(0), in.extent(1), in.extent(2) + top + bottom, in.extent(3) + left + right});
    for (std::size_t n = 0; n < in.extent(0); ++n)
        for (std::size_t c = 0; c < in.extent(1); ++c)
            for (std::size_t y = 0; y < out.extent(2); ++y)
                for (std::size_t x = 0; x < out.extent(3); ++x) {
                    const std::size_t iy = static_cast<std::size_t>(
                        mirror_index(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top), h));
                    const std::size_t ix = static_cast<std::size_t>(
                        mirror_index(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(left), w));
                    out.at(n, c, y, x) = in.at(n, c, iy, ix);
                }
    return out;
}

// Quadruple-nested-loop convolution over [N,C,H,W]. With same_reflect, the
// input is addressed through mirrored indices directly (no materialized pad).
inline Tensor conv2d_reference(const Tensor& in, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                               bool same_reflect) {
    const std::size_t N = in.extent(0), C = in.extent(1), H = in.extent(2), W = in.extent(3);
    const std::size_t K = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
    std::size_t oh, ow;
    std::ptrdiff_t y0, x0;
    if (same_reflect) {
        oh = (H + stride - 1) / stride;
        ow = (W + stride - 1) / stride;
        y0 = -static_cast<std::ptrdiff_t>((kh - 1) / 2);
        x0 = -static_cast<std::ptrdiff_t>((kw - 1) / 2);
    } else {
        oh = (H - kh) / stride + 1;
        ow = (W - kw) / stride + 1;
        y0 = 0;
        x0 = 0;
    }
    Tensor out(Shape{N, K, oh, ow});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = bias.empty() ? 0.0 : bias[k];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) + y0;
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) + x0;
                                const std::size_t my = static_cast<std::size_t>(
                                    mirror_index(iy, static_cast<std::ptrdiff_t>(H)));
                                const std::size_t mx = static_cast<std::size_t>(
                                    mirror_index(ix, static_cast<std::ptrdiff_t>(W)));
                                acc += in.at(n, c, my, mx) * kernel.at(k, c, ky, kx);
                            }
                    out.at(n, k, oy, ox) = acc;
                }
    return out;
}

inline Tensor upsample_reference(const Tensor& in, std::size_t f) {
    Tensor out(Shape{in.extent(0), in.extent(1), in.extent(2) * f, in.extent(3) * f});
    for (std::size_t n = 0; n < in.extent(0); ++n)
        for (std::size_t c = 0; c < in.extent(1); ++c)
            for (std::size_t y = 0; y < out.extent(2); ++y)
                for (std::size_t x = 0; x < out.extent(3); ++x)
                    out.at(n, c, y, x) = in.at(n, c, y / f, x / f);
    return out;
}

// Two-pass per-(sample, channel) mean and population std.
inline void moments_reference(const Tensor& in, Tensor* mean, Tensor* stddev) {
    const std::size_t N = in.extent(0), C = in.extent(1), H = in.extent(2), W = in.extent(3);
    *mean = Tensor(Shape{N, C});
    *stddev = Tensor(Shape{N, C});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) s += in.at(n, c, y, x);
            const double mu = s / static_cast<double>(H * W);
            double v = 0.0;
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double d = in.at(n, c, y, x) - mu;
                    v += d * d;
                }
            mean->at2(n, c) = mu;
            stddev->at2(n, c) = std::sqrt(v / static_cast<double>(H * W));
        }
}

// Explicit channel-pair loop Gram matrix.
inline Tensor gram_reference(const Tensor& f) {
    const std::size_t N = f.extent(0), C = f.extent(1), H = f.extent(2), W = f.extent(3);
    Tensor g(Shape{N, C, C});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                double s = 0.0;
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t x = 0; x < W; ++x) s += f.at(n, i, y, x) * f.at(n, j, y, x);
                g[(n * C + i) * C + j] = s / static_cast<double>(H * W);
            }
    return g;
}

inline double sigmoid_reference(double x) {
    const long double v = 1.0L / (1.0L + std::exp(static_cast<long double>(-x)));
    return static_cast<double>(v);
}

// Scalar Adam sequence: returns the parameter value after `steps` updates
// with constant gradient g.
inline double adam_scalar_reference(double p, double g, std::size_t steps, double alpha, double beta1, double beta2,
                                    double eps) {
    double m = 0.0, v = 0.0;
    for (std::size_t t = 1; t <= steps; ++t) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
        const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
        p -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
    return p;
}

// Percentile with linear interpolation between order statistics.
inline double percentile_reference(std::vector<double> xs, double pct) {
    if (xs.empty()) throw std::invalid_argument("empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * pct / 100.0;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = h - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

// Coefficient of determination via the squared correlation.
inline double r2_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return (sxy * sxy) / (sxx * syy);
}

namespace detail {

inline double simpson_rule(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_rule(f, a, m, fa, flm, fm);
    const double right = simpson_rule(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson_rule(f, a, b, fa, fm, fb), eps, 48);
}

}  // namespace detail

// Two-sided Student-t p-value by numerical integration of the density with
// the substitution x = sqrt(nu) * tan(theta), which maps the real line to
// (-pi/2, pi/2) and keeps the integrand bounded.
inline double t_two_sided_p_reference(double t, double nu) {
    auto g = [nu](double th) {
        const double c = std::cos(th);
        if (c <= 0.0) return 0.0;
        const double x = std::sqrt(nu) * std::tan(th);
        return std::pow(1.0 + x * x / nu, -0.5 * (nu + 1.0)) * std::sqrt(nu) / (c * c);
    };
    const double half_pi = 1.5707963267948966;
    const double half = detail::integrate(g, 0.0, half_pi, 1e-14);
    const double from = std::atan(std::abs(t) / std::sqrt(nu));
    const double tail = detail::integrate(g, from, half_pi, 1e-14);
    return tail / half;
}

}  // namespace oracle
