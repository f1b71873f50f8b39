#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nst/tensor.hpp"
#include "nst/tensor_ops.hpp"

namespace nst {

class Tape;

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
};

// Reverse-mode tape. Nodes are recorded in topological (creation) order;
// backward() visits each node exactly once in reverse order and accumulates
// gradients into per-node buffers.
class Tape {
public:
    using BackFn = std::function<void(Tape&, int)>;

    Var leaf(Tensor value);

    // Records a new node. `back` pulls the node's gradient and accumulates
    // into its parents' buffers; pass nullptr for non-differentiable nodes.
    Var emit(Tensor value, std::initializer_list<Var> parents, BackFn back);

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }

    // Gradient of the last backward() root w.r.t. `v` (zeros if the node is
    // not on the root's path).
    const Tensor& grad(Var v);

    // Seeds d(root)/d(root) = 1 and propagates. Root must be a size-1 node.
    void backward(Var root);

    std::size_t node_count() const { return nodes_.size(); }

    // Internal accessors for op implementations.
    const Tensor& node_value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor& grad_buffer(int id);
    bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }
    const std::array<int, 4>& parents(int id) const { return nodes_[static_cast<std::size_t>(id)].parents; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::array<int, 4> parents{-1, -1, -1, -1};
        BackFn back;
    };

    std::size_t check(Var v) const;

    std::vector<Node> nodes_;
};

// Differentiable primitives. Forward values are computed by the plain
// tensor_ops kernels so the tape and the plain API share one numeric path.
Var conv2d(Var input, Var kernel, Var bias, std::size_t stride, Padding padding);
Var conv2d(Var input, Var kernel, std::size_t stride, Padding padding);  // no bias
Var reflect_pad(Var input, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right);
Var upsample_nearest(Var input, std::size_t factor);
Var relu(Var x);
Var sigmoid(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var spatial_mean(Var x);                                               // [N,C,H,W] -> [N,C]
Var broadcast_spatial(Var nc, std::size_t h, std::size_t w);           // [N,C] -> [N,C,H,W]
Var broadcast_channels(Var c, std::size_t n, std::size_t h, std::size_t w);  // [C] -> [N,C,H,W]
Var rsqrt(Var x);
Var sum(Var x);  // -> [1]
Var matvec(Var weight, Var x, Var bias);  // [o,i] x [i] + [o] -> [o]
Var reshape(Var x, Shape shape);
Var slice1d(Var x, std::size_t offset, std::size_t len);

// Finite-difference check of the tape gradients of a scalar function.
struct GradCheckReport {
    double max_rel_err = 0.0;
    bool all_finite = true;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    std::string note;
};

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central differences with step `h` (must lie in [1e-7, 1e-3]). Relative
// error per element is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> params, double h = 1e-5);

}  // namespace nst
