#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nst/rng.hpp"
#include "nst/tensor.hpp"
#include "nst/tensor_ops.hpp"
#include "oracles.hpp"

using namespace nst;

namespace {

Tensor random_image(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w, double lo = -1.0,
                    double hi = 1.0) {
    return rng.uniform_tensor(Shape{n, c, h, w}, lo, hi);
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t(Shape{2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(t.rank() == 4);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1.0}), std::invalid_argument);
    CHECK(Tensor(Shape{0, 3}).size() == 0);
    CHECK(Tensor::scalar(2.5).item() == 2.5);
}

TEST_CASE("conv2d pointwise scaling") {
    Tensor in(Shape{1, 1, 3, 3}, 1.0);
    Tensor k(Shape{1, 1, 1, 1}, 2.0);
    Tensor b(Shape{1});
    Tensor out = conv2d(in, k, b, 1, Padding::kSameReflect);
    REQUIRE(out.shape() == Shape{1, 1, 3, 3});
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 2.0);
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(7);
    Tensor in = random_image(rng, 1, 1, 3, 3);
    Tensor k(Shape{1, 1, 3, 3});
    k[4] = 1.0;  // center tap
    Tensor out = conv2d(in, k, Tensor{}, 1, Padding::kSameReflect);
    CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("conv2d strided matches loop reference") {
    Rng rng(101);
    Tensor in = random_image(rng, 1, 2, 5, 5);
    Tensor k = rng.normal_tensor(Shape{3, 2, 3, 3}, 1.0);
    Tensor b = rng.normal_tensor(Shape{3}, 1.0);
    for (std::size_t stride : {1, 2, 3}) {
        Tensor got = conv2d(in, k, b, stride, Padding::kSameReflect);
        Tensor want = oracle::conv2d_reference(in, k, b, stride, true);
        REQUIRE(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
    Tensor got = conv2d(in, k, b, 2, Padding::kValid);
    Tensor want = oracle::conv2d_reference(in, k, b, 2, false);
    REQUIRE(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) <= 1e-12);
}

TEST_CASE("conv2d reference grid") {
    // Shapes x strides x paddings, all against the loop oracle.
    Rng rng(2024);
    std::size_t cases = 0;
    for (std::size_t h : {4, 5, 7, 8}) {
        for (std::size_t w : {4, 6}) {
            for (std::size_t kh : {1, 3}) {
                for (std::size_t kw : {1, 3}) {
                    for (std::size_t stride : {1, 2}) {
                        for (bool same : {true, false}) {
                            if (!same && (kh > h || kw > w)) continue;
                            Tensor in = random_image(rng, 2, 3, h, w);
                            Tensor k = rng.normal_tensor(Shape{2, 3, kh, kw}, 0.7);
                            Tensor b = rng.normal_tensor(Shape{2}, 0.5);
                            Tensor got = conv2d(in, k, b, stride, same ? Padding::kSameReflect : Padding::kValid);
                            Tensor want = oracle::conv2d_reference(in, k, b, stride, same);
                            REQUIRE(got.shape() == want.shape());
                            CHECK(max_abs_diff(got, want) <= 1e-12);
                            ++cases;
                        }
                    }
                }
            }
        }
    }
    CHECK(cases >= 100);
}

TEST_CASE("conv2d errors") {
    Tensor in(Shape{1, 2, 4, 4}, 1.0);
    Tensor k_bad(Shape{1, 3, 3, 3}, 1.0);
    CHECK_THROWS_WITH_AS(conv2d(in, k_bad, Tensor{}, 1, Padding::kSameReflect),
                         doctest::Contains("channels"), std::invalid_argument);
    Tensor k(Shape{1, 2, 3, 3}, 1.0);
    CHECK_THROWS_AS(conv2d(in, k, Tensor{}, 0, Padding::kValid), std::invalid_argument);
    Tensor k_even(Shape{1, 2, 2, 2}, 1.0);
    CHECK_THROWS_AS(conv2d(in, k_even, Tensor{}, 1, Padding::kSameReflect), std::invalid_argument);
    Tensor b_bad(Shape{3}, 0.0);
    CHECK_THROWS_AS(conv2d(in, k, b_bad, 1, Padding::kSameReflect), std::invalid_argument);
}

TEST_CASE("conv2d linearity") {
    Rng rng(55);
    Tensor x = random_image(rng, 1, 2, 6, 6);
    Tensor y = random_image(rng, 1, 2, 6, 6);
    Tensor k = rng.normal_tensor(Shape{3, 2, 3, 3}, 1.0);
    const double a = 1.7, b = -0.4;
    Tensor lhs_in = add(scale(x, a), scale(y, b));
    Tensor lhs = conv2d(lhs_in, k, Tensor{}, 1, Padding::kSameReflect);
    Tensor rhs = add(scale(conv2d(x, k, Tensor{}, 1, Padding::kSameReflect), a),
                     scale(conv2d(y, k, Tensor{}, 1, Padding::kSameReflect), b));
    double denom = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) denom = std::max(denom, std::abs(rhs[i]));
    CHECK(max_abs_diff(lhs, rhs) / denom <= 1e-10);
}

TEST_CASE("conv2d same-reflect stride 1 preserves dims for odd kernels") {
    Rng rng(9);
    for (std::size_t kh : {1, 3, 5, 7, 9}) {
        for (std::size_t kw : {1, 3, 5, 7, 9}) {
            for (std::size_t h = 1; h <= 8; ++h) {
                for (std::size_t w = 1; w <= 8; ++w) {
                    const bool pad_ok = (kh - 1) / 2 < h && (kw - 1) / 2 < w;
                    Tensor in = random_image(rng, 1, 1, h, w);
                    Tensor k = rng.normal_tensor(Shape{1, 1, kh, kw}, 0.5);
                    if (!pad_ok) {
                        CHECK_THROWS_AS(conv2d(in, k, Tensor{}, 1, Padding::kSameReflect), std::invalid_argument);
                        continue;
                    }
                    Tensor out = conv2d(in, k, Tensor{}, 1, Padding::kSameReflect);
                    CHECK(out.extent(2) == h);
                    CHECK(out.extent(3) == w);
                }
            }
        }
    }
}

TEST_CASE("reflect_pad row example") {
    Tensor in(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
    Tensor out = reflect_pad(in, 0, 0, 1, 1);
    REQUIRE(out.shape() == Shape{1, 1, 1, 5});
    const std::vector<double> want = {2, 1, 2, 3, 2};
    for (std::size_t i = 0; i < 5; ++i) CHECK(out[i] == want[i]);
}

TEST_CASE("reflect_pad zero pad is identity") {
    Rng rng(3);
    Tensor in = random_image(rng, 2, 2, 3, 4);
    CHECK(bitwise_equal(reflect_pad(in, 0, 0, 0, 0), in));
}

TEST_CASE("reflect_pad matches index-map oracle") {
    Rng rng(42);
    Tensor in = random_image(rng, 1, 1, 4, 4);
    Tensor got = reflect_pad(in, 2, 2, 2, 2);
    Tensor want = oracle::reflect_pad_reference(in, 2, 2, 2, 2);
    CHECK(bitwise_equal(got, want));
}

TEST_CASE("reflect_pad rejects pad >= dim") {
    Tensor in(Shape{1, 1, 3, 3}, 1.0);
    CHECK_THROWS_AS(reflect_pad(in, 3, 0, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(reflect_pad(in, 0, 0, 0, 5), std::invalid_argument);
}

TEST_CASE("reflect_pad then center-crop is identity") {
    Rng rng(77);
    for (int seed_case = 0; seed_case < 20; ++seed_case) {
        const std::size_t h = 2 + rng.integer(5);
        const std::size_t w = 2 + rng.integer(5);
        const std::size_t t = rng.integer(h), b = rng.integer(h);
        const std::size_t l = rng.integer(w), r = rng.integer(w);
        Tensor in = random_image(rng, 1, 2, h, w);
        Tensor out = center_crop(reflect_pad(in, t, b, l, r), t, b, l, r);
        CHECK(bitwise_equal(out, in));
    }
}

TEST_CASE("upsample_nearest 2x2 factor 2") {
    Tensor in(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor out = upsample_nearest(in, 2);
    const std::vector<double> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    REQUIRE(out.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(out[i] == want[i]);
}

TEST_CASE("upsample_nearest factor 1 is identity") {
    Rng rng(5);
    Tensor in = random_image(rng, 1, 3, 3, 2);
    CHECK(bitwise_equal(upsample_nearest(in, 1), in));
}

TEST_CASE("upsample_nearest matches index-map oracle") {
    Rng rng(6);
    Tensor in = random_image(rng, 1, 1, 3, 3);
    CHECK(bitwise_equal(upsample_nearest(in, 3), oracle::upsample_reference(in, 3)));
}

TEST_CASE("upsample_nearest composes multiplicatively") {
    Rng rng(8);
    Tensor in = random_image(rng, 1, 2, 3, 4);
    for (std::size_t a : {1, 2, 3}) {
        for (std::size_t b : {1, 2}) {
            CHECK(bitwise_equal(upsample_nearest(upsample_nearest(in, a), b), upsample_nearest(in, a * b)));
        }
    }
}

TEST_CASE("relu and sigmoid basics") {
    Tensor in(Shape{3}, std::vector<double>{-1, 0, 2});
    Tensor r = relu(in);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
}

TEST_CASE("sigmoid matches extended-precision reference") {
    Rng rng(11);
    Tensor in = rng.uniform_tensor(Shape{200}, -30.0, 30.0);
    Tensor out = sigmoid(in);
    for (std::size_t i = 0; i < in.size(); ++i) {
        CHECK(std::abs(out[i] - oracle::sigmoid_reference(in[i])) <= 1e-12);
        CHECK(out[i] > 0.0);
        CHECK(out[i] < 1.0);
    }
}

TEST_CASE("elementwise broadcast rules") {
    Tensor a(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor s = Tensor::scalar(10.0);
    Tensor sum = add(a, s);
    CHECK(sum[3] == 14.0);
    Tensor bad(Shape{3}, 0.0);
    CHECK_THROWS_AS(add(a, bad), std::invalid_argument);
    CHECK(mul(s, a)[2] == 30.0);
    CHECK(sub(a, s)[0] == -9.0);
}

TEST_CASE("spatial_moments constant channel") {
    Tensor in(Shape{1, 1, 2, 3}, 5.0);
    Moments m = spatial_moments(in);
    CHECK(m.mean.at2(0, 0) == 5.0);
    CHECK(m.stddev.at2(0, 0) == 0.0);
}

TEST_CASE("spatial_moments two-point channel") {
    Tensor in(Shape{1, 1, 1, 2}, std::vector<double>{1, 3});
    Moments m = spatial_moments(in);
    CHECK(m.mean.at2(0, 0) == 2.0);
    CHECK(m.stddev.at2(0, 0) == 1.0);
}

TEST_CASE("spatial_moments matches two-pass oracle") {
    Rng rng(13);
    Tensor in = random_image(rng, 2, 3, 4, 4, -2.0, 2.0);
    Moments m = spatial_moments(in);
    Tensor mean, stddev;
    oracle::moments_reference(in, &mean, &stddev);
    CHECK(max_abs_diff(m.mean, mean) <= 1e-14);
    CHECK(max_abs_diff(m.stddev, stddev) <= 1e-14);
}

TEST_CASE("primitive outputs stay finite on finite inputs") {
    Rng rng(17);
    for (int i = 0; i < 10; ++i) {
        Tensor in = random_image(rng, 1, 2, 5, 5, -100.0, 100.0);
        Tensor k = rng.normal_tensor(Shape{2, 2, 3, 3}, 3.0);
        CHECK(conv2d(in, k, Tensor{}, 1, Padding::kSameReflect).all_finite());
        CHECK(sigmoid(in).all_finite());
        CHECK(spatial_moments(in).stddev.all_finite());
    }
}
