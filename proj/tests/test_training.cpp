#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nst/training.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace nst;

namespace {

Corpus one_image_corpus(Tensor image, const std::string& id) {
    Corpus c;
    c.hashes.push_back(image_content_hash(image));
    c.images.push_back(std::move(image));
    c.ids.push_back(id);
    return c;
}

RunConfig tiny_train_config() {
    RunConfig cfg;
    cfg.transfer_channels = {2, 4, 4};
    cfg.residual_blocks = 1;
    cfg.pred_backbone_channels = {2, 4};
    cfg.pred_bottleneck_dim = 4;
    cfg.batch_size = 2;
    cfg.budget = 8;
    cfg.trace_every = 2;
    return cfg;
}

}  // namespace

TEST_CASE("adam leaves params alone under zero gradients from a fresh state") {
    ModelParams params;
    params["w"] = Tensor(Shape{3}, std::vector<double>{1.0, -2.0, 0.5});
    std::map<std::string, Tensor> grads;
    grads["w"] = Tensor(Shape{3});
    AdamState state;
    const Tensor before = params["w"];
    adam_update(params, grads, state);
    CHECK(bitwise_equal(params["w"], before));
    CHECK(state.step == 1);

    // After a non-zero step, a zero-gradient step decays the moments by
    // exactly beta1 / beta2.
    grads["w"] = Tensor(Shape{3}, std::vector<double>{0.5, 0.5, 0.5});
    adam_update(params, grads, state);
    const Tensor m_before = state.m["w"];
    const Tensor v_before = state.v["w"];
    grads["w"] = Tensor(Shape{3});
    adam_update(params, grads, state);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(state.m["w"][i] == doctest::Approx(0.9 * m_before[i]).epsilon(1e-15));
        CHECK(state.v["w"][i] == doctest::Approx(0.999 * v_before[i]).epsilon(1e-15));
    }
}

TEST_CASE("adam matches the scalar reference sequence") {
    ModelParams params;
    params["x"] = Tensor::scalar(2.0);
    AdamState state;
    std::map<std::string, Tensor> grads;
    grads["x"] = Tensor::scalar(0.3);
    for (int i = 0; i < 25; ++i) adam_update(params, grads, state);
    const double want = oracle::adam_scalar_reference(2.0, 0.3, 25, 0.001, 0.9, 0.999, 1e-8);
    CHECK(params["x"].item() == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("adam first step moves by roughly alpha against the gradient sign") {
    for (double g : {3.0, -0.004}) {
        ModelParams params;
        params["x"] = Tensor::scalar(1.0);
        AdamState state;
        std::map<std::string, Tensor> grads;
        grads["x"] = Tensor::scalar(g);
        adam_update(params, grads, state);
        const double delta = params["x"].item() - 1.0;
        CHECK(std::abs(delta + 0.001 * (g > 0 ? 1.0 : -1.0)) <= 0.001 * 1e-4);
    }
}

TEST_CASE("adam rejects non-finite and mismatched gradients") {
    ModelParams params;
    params["w"] = Tensor(Shape{2}, 1.0);
    AdamState state;
    std::map<std::string, Tensor> grads;
    grads["w"] = Tensor(Shape{2}, std::vector<double>{1.0, std::nan("")});
    CHECK_THROWS_WITH_AS(adam_update(params, grads, state), doctest::Contains("w"), std::runtime_error);
    CHECK(state.step == 0);  // rejected before any state mutation
    grads["w"] = Tensor(Shape{3}, 1.0);
    CHECK_THROWS_AS(adam_update(params, grads, state), std::invalid_argument);
    grads.clear();
    CHECK_THROWS_AS(adam_update(params, grads, state), std::invalid_argument);
}

TEST_CASE("bilinear resize basics") {
    Rng rng(1);
    Tensor img = rng.uniform_tensor(Shape{1, 3, 5, 7}, 0.0, 1.0);
    CHECK(bitwise_equal(resize_bilinear(img, 5, 7), img));
    Tensor up = resize_bilinear(img, 10, 14);
    CHECK(up.extent(2) == 10);
    for (std::size_t i = 0; i < up.size(); ++i) {
        CHECK(up[i] >= 0.0);
        CHECK(up[i] <= 1.0);
    }
    Tensor constant(Shape{1, 3, 4, 4}, 0.37);
    Tensor down = resize_bilinear(constant, 3, 5);
    for (std::size_t i = 0; i < down.size(); ++i) CHECK(down[i] == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("augmentation disabled is the identity") {
    Rng rng(2);
    Tensor img = rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0);
    AugmentConfig cfg;
    cfg.enabled = false;
    Rng aug_rng(3);
    CHECK(bitwise_equal(augment_style(img, cfg, aug_rng), img));
}

TEST_CASE("forced flip with neutral ranges is an exact mirror") {
    Rng rng(4);
    Tensor img = rng.uniform_tensor(Shape{1, 3, 5, 4}, 0.0, 1.0);
    AugmentConfig cfg;
    cfg.flip_prob = 1.0;
    cfg.rescale_min = cfg.rescale_max = 1.0;
    cfg.hue_max_rad = 0.0;
    cfg.contrast_min = cfg.contrast_max = 1.0;
    Rng aug_rng(5);
    Tensor out = augment_style(img, cfg, aug_rng);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 5; ++y)
            for (std::size_t x = 0; x < 4; ++x) CHECK(out.at(0, c, y, x) == img.at(0, c, y, 3 - x));
}

TEST_CASE("augmentation is deterministic in the rng state") {
    Rng rng(6);
    Tensor img = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
    AugmentConfig cfg;
    Rng a(77), b(77);
    Tensor out_a = augment_style(img, cfg, a);
    Tensor out_b = augment_style(img, cfg, b);
    CHECK(bitwise_equal(out_a, out_b));
    const std::string checksum = testutil::tensor_checksum(out_a);
    CHECK(checksum == testutil::golden("augment_checksum.txt", checksum));
}

TEST_CASE("augmentation preserves dims and the value range") {
    Rng rng(7);
    Tensor img = rng.uniform_tensor(Shape{1, 3, 9, 7}, 0.0, 1.0);
    AugmentConfig cfg;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng a(seed);
        Tensor out = augment_style(img, cfg, a);
        REQUIRE(out.shape() == img.shape());
        CHECK(out.all_finite());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] >= 0.0);
            CHECK(out[i] <= 1.0);
        }
    }
}

TEST_CASE("train_joint validates its inputs") {
    Rng rng(8);
    Corpus contents = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "c");
    Corpus styles = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "s");
    RunConfig cfg = tiny_train_config();
    cfg.budget = 0;
    CHECK_THROWS_AS(train_joint(cfg, contents, styles), std::invalid_argument);
    cfg.budget = 1;
    CHECK_THROWS_AS(train_joint(cfg, Corpus{}, styles), std::invalid_argument);
    CHECK_THROWS_AS(train_joint(cfg, contents, Corpus{}), std::invalid_argument);
}

TEST_CASE("train_joint is deterministic and reduces the loss") {
    Rng rng(9);
    Corpus contents = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "c");
    Corpus styles = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "s");
    RunConfig cfg = tiny_train_config();
    cfg.budget = 40;
    cfg.trace_every = 10;
    TrainResult a = train_joint(cfg, contents, styles);
    TrainResult b = train_joint(cfg, contents, styles);
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, tensor] : a.params) CHECK(bitwise_equal(tensor, b.params.at(name)));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].total == b.trace[i].total);
    CHECK(a.trace.back().total < a.trace.front().total);
    CHECK(a.adam.step == 40);
    CHECK(!a.config.style_corpus_hashes.empty());
}

TEST_CASE("adain baseline trains its decoder deterministically") {
    Rng rng(10);
    Corpus contents = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "c");
    Corpus styles = one_image_corpus(rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0), "s");
    RunConfig cfg = tiny_train_config();
    cfg.budget = 30;
    TrainResult a = train_adain_baseline(cfg, contents, styles);
    TrainResult b = train_adain_baseline(cfg, contents, styles);
    for (const auto& [name, tensor] : a.params) CHECK(bitwise_equal(tensor, b.params.at(name)));
    CHECK(a.config.model_kind == "adain");
    CHECK(a.trace.back().total < a.trace.front().total);

    // Decoder mirrors the truncated encoder and inverts its geometry.
    LossNetwork net = loss_network(cfg);
    Tensor out = adain_stylize(contents.images[0], styles.images[0], net, a.params);
    REQUIRE(out.shape() == contents.images[0].shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] > 0.0);
        CHECK(out[i] < 1.0);
    }
}

TEST_CASE("adain stylize with the content as style approximates feature inversion") {
    // With s == c the feature transform is the identity up to the eps
    // correction, so the decoder target degenerates to inverting enc(c).
    Rng rng(11);
    LossNetwork net = LossNetwork::make(417);
    Tensor content = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
    const Tensor cf = net.encode_to_deepest_style_layer(content);
    const Tensor same = adain_transfer(cf, cf);
    CHECK(max_abs_diff(same, cf) <= 1e-4);
}

TEST_CASE("direct optimization from a stationary start stays put") {
    Rng rng(12);
    LossNetwork net = LossNetwork::make(417);
    Tensor content = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
    AdamConfig adam;
    adam.alpha = 0.02;
    OptimizeResult r = direct_optimize(content, content, net, 1.0, 10, adam);
    CHECK(r.trace.front().total == 0.0);
    CHECK(r.best_report.total == 0.0);
    // Total loss never drifts more than 1% of its scale from the optimum.
    for (const TraceRow& row : r.trace) CHECK(row.total <= 1e-8);
}

TEST_CASE("negligible style weight keeps the image at the content") {
    Rng rng(13);
    LossNetwork net = LossNetwork::make(417);
    Tensor content = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
    Tensor style = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
    AdamConfig adam;
    adam.alpha = 0.02;
    OptimizeResult r = direct_optimize(content, style, net, 1e-9, 40, adam);
    CHECK(content_loss(r.best_image, content, net) <= 1e-6);
    CHECK(max_abs_diff(r.best_image, content) <= 2e-2);
}

TEST_CASE("direct optimization tracks the best iterate") {
    Rng rng(14);
    LossNetwork net = LossNetwork::make(417);
    Tensor content = rng.uniform_tensor(Shape{1, 3, 16, 16}, 0.0, 1.0);
    Tensor style = rng.uniform_tensor(Shape{1, 3, 16, 16}, 0.0, 1.0);
    AdamConfig adam;
    adam.alpha = 0.02;
    OptimizeResult r = direct_optimize(content, style, net, 1.0, 60, adam);
    CHECK(r.best_report.total <= r.trace.front().total);
    double min_total = r.trace.front().total;
    for (const TraceRow& row : r.trace) min_total = std::min(min_total, row.total);
    CHECK(r.best_report.total == min_total);
    CHECK(r.best_report.total < 0.7 * r.trace.front().total);
    CHECK_THROWS_AS(direct_optimize(content, style, net, 1.0, 0, adam), std::invalid_argument);
}

TEST_CASE("loss trace rows serialize with full precision") {
    TraceRow row{12, 0.1, 0.25, 0.35};
    CHECK(trace_csv_header() == "step,content_loss,style_loss,total\n");
    const std::string line = trace_csv_row(row);
    CHECK(line.find("12,") == 0);
    CHECK(line.find("0.25") != std::string::npos);
}
