#include "nst/gradsuite.hpp"

#include <functional>
#include <limits>

#include "nst/autodiff.hpp"
#include "nst/losses.hpp"
#include "nst/networks.hpp"
#include "nst/normalization.hpp"
#include "nst/rng.hpp"

namespace nst {

namespace {

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Fixed-weight scalarization so every output element feeds the objective.
ScalarFn scalarized(OpFn op, const std::vector<Tensor>& params, Rng& rng) {
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

struct Harness {
    std::size_t seeds;
    double tolerance;
    std::vector<GradSuiteEntry> entries;

    void run(const std::string& name, double h,
             const std::function<void(Rng&, std::vector<OpFn>*, std::vector<std::vector<Tensor>>*)>& make) {
        GradSuiteEntry entry{name, 0.0, true};
        for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
            Rng rng(seed);
            std::vector<OpFn> ops;
            std::vector<std::vector<Tensor>> params;
            make(rng, &ops, &params);
            for (std::size_t i = 0; i < ops.size(); ++i) {
                ScalarFn f = scalarized(ops[i], params[i], rng);
                const GradCheckReport r = grad_check(f, params[i], h);
                entry.max_rel_err = std::max(entry.max_rel_err, r.max_rel_err);
                if (!r.all_finite) entry.max_rel_err = std::numeric_limits<double>::infinity();
            }
        }
        entry.ok = entry.max_rel_err <= tolerance;
        entries.push_back(std::move(entry));
    }
};

void smooth_prediction_fixture(Rng& rng, const TransferNetConfig& tcfg, const PredictionNetConfig& pcfg,
                               ModelParams* tparams, ModelParams* pparams) {
    *tparams = init_transfer_params(tcfg, rng, 0.5);
    *pparams = init_prediction_params(pcfg, tcfg, rng, 0.05);
    for (std::size_t i = 0; i < pcfg.backbone_channels.size(); ++i) {
        (*pparams)["p.conv" + std::to_string(i + 1) + ".b"].fill(2.0);
    }
    Tensor& out_bias = (*pparams)["p.fc2.b"];
    for (const LayerSlice& slice : embedding_layout(tcfg)) {
        for (std::size_t i = 0; i < slice.channels; ++i) {
            out_bias[slice.offset + i] = 0.5;
            out_bias[slice.offset + slice.channels + i] = 3.0;
        }
    }
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::size_t seeds, double tolerance) {
    Harness h{seeds, tolerance, {}};

    h.run("conv2d", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        Tensor x = rng.uniform_tensor(Shape{1, 2, 4, 5}, -1.0, 1.0);
        Tensor k = rng.normal_tensor(Shape{2, 2, 3, 3}, 0.6);
        Tensor b = rng.normal_tensor(Shape{2}, 0.6);
        for (auto padding : {Padding::kSameReflect, Padding::kValid}) {
            for (std::size_t stride : {1, 2}) {
                ops->push_back([padding, stride](Tape&, const std::vector<Var>& p) {
                    return conv2d(p[0], p[1], p[2], stride, padding);
                });
                params->push_back({x, k, b});
            }
        }
    });

    h.run("reflect_pad", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return reflect_pad(p[0], 1, 2, 2, 1); });
        params->push_back({rng.uniform_tensor(Shape{1, 2, 3, 4}, -1.0, 1.0)});
    });

    h.run("upsample_nearest", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return upsample_nearest(p[0], 2); });
        params->push_back({rng.uniform_tensor(Shape{1, 2, 3, 4}, -1.0, 1.0)});
    });

    h.run("relu", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        // inputs held away from the kink
        ops->push_back([](Tape&, const std::vector<Var>& p) { return relu(sub(p[0], p[1])); });
        params->push_back({rng.uniform_tensor(Shape{8}, 0.2, 1.2), rng.uniform_tensor(Shape{8}, -1.3, -0.3)});
    });

    h.run("sigmoid", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return sigmoid(mul(p[0], p[1])); });
        params->push_back({rng.uniform_tensor(Shape{8}, -1.5, 1.5), rng.uniform_tensor(Shape{8}, -1.5, 1.5)});
    });

    h.run("elementwise", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        Tensor x = rng.uniform_tensor(Shape{6}, -1.0, 1.0);
        Tensor y = rng.uniform_tensor(Shape{6}, -1.0, 1.0);
        ops->push_back([](Tape&, const std::vector<Var>& p) {
            return add_scalar(scale(mul(add(p[0], p[1]), sub(p[0], p[1])), 1.7), -0.3);
        });
        params->push_back({x, y});
    });

    h.run("rsqrt", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return rsqrt(p[0]); });
        params->push_back({rng.uniform_tensor(Shape{6}, 0.3, 2.0)});
    });

    h.run("spatial_mean", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return spatial_mean(p[0]); });
        params->push_back({rng.uniform_tensor(Shape{2, 3, 3, 2}, -1.0, 1.0)});
    });

    h.run("broadcast", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return broadcast_spatial(p[0], 2, 3); });
        params->push_back({rng.uniform_tensor(Shape{2, 3}, -1.0, 1.0)});
        ops->push_back([](Tape&, const std::vector<Var>& p) { return broadcast_channels(p[0], 2, 2, 2); });
        params->push_back({rng.uniform_tensor(Shape{4}, -1.0, 1.0)});
    });

    h.run("reshape_slice", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return slice1d(reshape(p[0], Shape{24}), 3, 15); });
        params->push_back({rng.uniform_tensor(Shape{2, 3, 2, 2}, -1.0, 1.0)});
    });

    h.run("matvec", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return matvec(p[0], p[1], p[2]); });
        params->push_back({rng.normal_tensor(Shape{3, 5}, 0.8), rng.uniform_tensor(Shape{5}, -1.0, 1.0),
                           rng.normal_tensor(Shape{3}, 0.5)});
    });

    h.run("gram_matrix", 1e-5, [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
        ops->push_back([](Tape&, const std::vector<Var>& p) { return gram_matrix(p[0]); });
        params->push_back({rng.uniform_tensor(Shape{1, 3, 4, 4}, -1.0, 1.0)});
    });

    h.run("conditional_instance_norm", 1e-5,
          [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
              ops->push_back([](Tape&, const std::vector<Var>& p) {
                  return conditional_instance_norm(p[0], p[1], p[2]);
              });
              params->push_back({rng.uniform_tensor(Shape{1, 2, 4, 4}, -1.0, 1.0),
                                 rng.uniform_tensor(Shape{2}, 0.5, 2.0), rng.uniform_tensor(Shape{2}, -1.0, 1.0)});
          });

    h.run("total_loss_wrt_image", 1e-5,
          [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
              const LossNetwork net = LossNetwork::make(
                  rng.bits(), {LossLayerSpec{3, 3, 1, false}, LossLayerSpec{4, 3, 2, false}}, {0}, {1}, 0.2);
              const Tensor c = rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0);
              const Tensor s = rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0);
              ops->push_back([net, c, s](Tape& tape, const std::vector<Var>& p) {
                  return total_loss_v(tape, p[0], c, s, net, 1.0);
              });
              params->push_back({rng.uniform_tensor(Shape{1, 3, 6, 6}, 0.0, 1.0)});
          });

    // End-to-end objective through T(c, P(s)) w.r.t. every network
    // parameter, at the larger step where ulp noise and truncation balance.
    h.run("end_to_end_total_loss", 1e-4,
          [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
              const TransferNetConfig tcfg{{2, 2, 2}, 1};
              PredictionNetConfig pcfg;
              pcfg.backbone_channels = {2, 3};
              pcfg.bottleneck_dim = 3;
              pcfg.output_dim = embedding_dim(tcfg);
              ModelParams tparams, pparams;
              smooth_prediction_fixture(rng, tcfg, pcfg, &tparams, &pparams);
              const LossNetwork net = LossNetwork::make(
                  41, {LossLayerSpec{3, 3, 1, false}, LossLayerSpec{4, 3, 2, false}}, {0}, {1}, 0.1);
              const Tensor content = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
              const Tensor style = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);

              std::vector<std::string> names;
              std::vector<Tensor> values;
              for (const auto& [name, tensor] : tparams) {
                  names.push_back(name);
                  values.push_back(tensor);
              }
              for (const auto& [name, tensor] : pparams) {
                  names.push_back(name);
                  values.push_back(tensor);
              }
              ops->push_back([names, tcfg, pcfg, net, content, style](Tape& tape, const std::vector<Var>& p) {
                  VarMap vars;
                  for (std::size_t i = 0; i < names.size(); ++i) vars.emplace(names[i], p[i]);
                  Var embedding = predict_embedding(tape, tape.leaf(style), vars, pcfg);
                  Var stylized = transfer_forward(tape, tape.leaf(content), embedding, vars, tcfg);
                  return total_loss_v(tape, stylized, content, style, net, 1.0);
              });
              params->push_back(std::move(values));
          });

    h.run("end_to_end_wrt_embedding", 1e-4,
          [](Rng& rng, std::vector<OpFn>* ops, std::vector<std::vector<Tensor>>* params) {
              const TransferNetConfig tcfg{{2, 2, 2}, 1};
              PredictionNetConfig pcfg;
              pcfg.backbone_channels = {2, 3};
              pcfg.bottleneck_dim = 3;
              pcfg.output_dim = embedding_dim(tcfg);
              ModelParams tparams, pparams;
              smooth_prediction_fixture(rng, tcfg, pcfg, &tparams, &pparams);
              const LossNetwork net = LossNetwork::make(
                  43, {LossLayerSpec{3, 3, 1, false}, LossLayerSpec{4, 3, 2, false}}, {0}, {1}, 0.1);
              const Tensor content = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
              const Tensor style = rng.uniform_tensor(Shape{1, 3, 8, 8}, 0.0, 1.0);
              const StyleEmbedding s = predict_embedding(style, pparams, pcfg);
              ops->push_back([tparams, tcfg, net, content, style](Tape& tape, const std::vector<Var>& p) {
                  VarMap vars = param_leaves(tape, tparams);
                  Var stylized = transfer_forward(tape, tape.leaf(content), p[0], vars, tcfg);
                  return total_loss_v(tape, stylized, content, style, net, 1.0);
              });
              params->push_back({s.values});
          });

    return h.entries;
}

}  // namespace nst
