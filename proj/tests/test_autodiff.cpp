#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nst/autodiff.hpp"
#include "nst/losses.hpp"
#include "nst/rng.hpp"

using namespace nst;

namespace {

// Wraps an op with a fixed random-weight scalarization so every element of
// the output contributes a distinct term to the gradient. The weights are
// drawn once, before the check, so repeated evaluations see one function.
ScalarFn scalarized(std::function<Var(Tape&, const std::vector<Var>&)> op, const std::vector<Tensor>& params,
                    Rng& rng) {
    Tape probe;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(probe.leaf(p));
    const Shape out_shape = probe.value(op(probe, leaves)).shape();
    Tensor w = rng.uniform_tensor(out_shape, 0.5, 1.5);
    return [op = std::move(op), w = std::move(w)](Tape& tape, const std::vector<Var>& p) {
        return sum(mul(op(tape, p), tape.leaf(w)));
    };
}

}  // namespace

TEST_CASE("shared subexpressions accumulate once per path") {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(3.0));
    Var z = mul(x, x);
    Var y = add(z, z);  // y = 2x^2, dy/dx = 4x
    tape.backward(y);
    CHECK(tape.grad(x)[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("gradient of a sum of roots is the sum of gradients") {
    auto grad_of = [](bool first, bool second) {
        Tape tape;
        Var x = tape.leaf(Tensor(Shape{3}, std::vector<double>{0.5, -1.5, 2.0}));
        Var f1 = sum(mul(x, x));
        Var f2 = scale(sum(x), 2.0);
        Var root = first && second ? add(f1, f2) : (first ? f1 : f2);
        tape.backward(root);
        return tape.grad(x);
    };
    Tensor g1 = grad_of(true, false);
    Tensor g2 = grad_of(false, true);
    Tensor gsum = grad_of(true, true);
    for (std::size_t i = 0; i < 3; ++i) CHECK(gsum[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12));
}

TEST_CASE("grad_check linear function is exact") {
    auto f = [](Tape&, const std::vector<Var>& p) { return scale(sum(p[0]), 3.0); };
    GradCheckReport r = grad_check(f, {Tensor(Shape{4}, std::vector<double>{1, -2, 0.5, 3})});
    CHECK(r.all_finite);
    CHECK(r.max_rel_err <= 1e-10);
}

TEST_CASE("grad_check conv sum") {
    Rng rng(31);
    Tensor x = rng.uniform_tensor(Shape{1, 2, 5, 5}, -1.0, 1.0);
    Tensor k = rng.normal_tensor(Shape{3, 2, 3, 3}, 0.5);
    auto f = [](Tape&, const std::vector<Var>& p) {
        return sum(conv2d(p[0], p[1], 1, Padding::kSameReflect));
    };
    GradCheckReport r = grad_check(f, {x, k}, 1e-5);
    CHECK(r.all_finite);
    CHECK(r.max_rel_err <= 1e-6);
}

TEST_CASE("grad_check style loss of a tiny network") {
    Rng rng(32);
    LossNetwork net = LossNetwork::make(5, {LossLayerSpec{3, 3, 1, true}, LossLayerSpec{4, 3, 2, true}}, {0, 1}, {},
                                        0.5);
    Tensor x = rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0);
    Tensor s = rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0);
    auto f = [&net, &s](Tape& tape, const std::vector<Var>& p) { return style_loss_v(tape, p[0], s, net); };
    GradCheckReport r = grad_check(f, {x}, 1e-5);
    CHECK(r.all_finite);
    CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("grad_check reports non-finite evaluations with the parameter index") {
    auto f = [](Tape&, const std::vector<Var>& p) { return sum(rsqrt(p[0])); };
    // Perturbing by h = 1e-5 drives the input negative.
    GradCheckReport r = grad_check(f, {Tensor(Shape{2}, std::vector<double>{1.0, 5e-6})}, 1e-5);
    CHECK_FALSE(r.all_finite);
    CHECK(r.worst_param == 0);
    CHECK(r.worst_index == 1);
    CHECK(r.note.find("param 0") != std::string::npos);
}

TEST_CASE("grad_check validates its step size") {
    auto f = [](Tape&, const std::vector<Var>& p) { return sum(p[0]); };
    CHECK_THROWS_AS(grad_check(f, {Tensor::scalar(1.0)}, 1e-2), std::invalid_argument);
    CHECK_THROWS_AS(grad_check(f, {Tensor::scalar(1.0)}, 1e-8), std::invalid_argument);
}

TEST_CASE("every differentiable primitive passes grad_check over 20 seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        CAPTURE(seed);

        auto check_op = [&rng](std::function<Var(Tape&, const std::vector<Var>&)> op, std::vector<Tensor> params) {
            ScalarFn f = scalarized(std::move(op), params, rng);
            GradCheckReport r = grad_check(f, std::move(params));
            CHECK(r.all_finite);
            CHECK(r.max_rel_err <= 1e-5);
        };

        // conv2d, all padding/stride/bias combinations.
        {
            Tensor x = rng.uniform_tensor(Shape{1, 2, 4, 5}, -1.0, 1.0);
            Tensor k = rng.normal_tensor(Shape{2, 2, 3, 3}, 0.6);
            Tensor b = rng.normal_tensor(Shape{2}, 0.6);
            for (auto padding : {Padding::kSameReflect, Padding::kValid}) {
                for (std::size_t stride : {1, 2}) {
                    check_op([padding, stride](Tape&, const std::vector<Var>& p) {
                        return conv2d(p[0], p[1], p[2], stride, padding);
                    }, {x, k, b});
                }
            }
        }
        // reflect_pad and upsample_nearest.
        {
            Tensor x = rng.uniform_tensor(Shape{1, 2, 3, 4}, -1.0, 1.0);
            check_op([](Tape&, const std::vector<Var>& p) { return reflect_pad(p[0], 1, 2, 2, 1); }, {x});
            check_op([](Tape&, const std::vector<Var>& p) { return upsample_nearest(p[0], 2); }, {x});
        }
        // Elementwise ops; relu inputs kept away from the kink at 0.
        {
            Tensor x = rng.uniform_tensor(Shape{6}, 0.2, 1.2);
            Tensor y = rng.uniform_tensor(Shape{6}, -1.3, -0.3);
            check_op([](Tape&, const std::vector<Var>& p) { return relu(sub(p[0], p[1])); }, {x, y});
            check_op([](Tape&, const std::vector<Var>& p) { return sigmoid(mul(p[0], p[1])); }, {x, y});
            check_op([](Tape&, const std::vector<Var>& p) { return add_scalar(scale(add(p[0], p[1]), 1.7), -0.3); },
                     {x, y});
            check_op([](Tape&, const std::vector<Var>& p) { return rsqrt(p[0]); }, {x});
        }
        // Reductions, broadcasts, reshapes, slices.
        {
            Tensor x = rng.uniform_tensor(Shape{2, 3, 3, 2}, -1.0, 1.0);
            check_op([](Tape&, const std::vector<Var>& p) { return spatial_mean(p[0]); }, {x});
            Tensor nc = rng.uniform_tensor(Shape{2, 3}, -1.0, 1.0);
            check_op([](Tape&, const std::vector<Var>& p) { return broadcast_spatial(p[0], 2, 3); }, {nc});
            Tensor cv = rng.uniform_tensor(Shape{4}, -1.0, 1.0);
            check_op([](Tape&, const std::vector<Var>& p) { return broadcast_channels(p[0], 2, 2, 2); }, {cv});
            check_op([](Tape&, const std::vector<Var>& p) { return slice1d(reshape(p[0], Shape{36}), 5, 20); }, {x});
        }
        // matvec and gram.
        {
            Tensor w = rng.normal_tensor(Shape{3, 5}, 0.8);
            Tensor v = rng.uniform_tensor(Shape{5}, -1.0, 1.0);
            Tensor b = rng.normal_tensor(Shape{3}, 0.5);
            check_op([](Tape&, const std::vector<Var>& p) { return matvec(p[0], p[1], p[2]); }, {w, v, b});
            Tensor f = rng.uniform_tensor(Shape{1, 3, 4, 4}, -1.0, 1.0);
            check_op([](Tape&, const std::vector<Var>& p) { return gram_matrix(p[0]); }, {f});
        }
    }
}
