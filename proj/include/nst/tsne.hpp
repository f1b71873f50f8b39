#pragma once

#include <cstdint>
#include <vector>

#include "nst/tensor.hpp"

namespace nst {

struct TsneConfig {
    double perplexity = 15.0;
    std::size_t iters = 500;
    double learning_rate = 100.0;
    double early_exaggeration = 4.0;
    std::size_t exaggeration_iters = 100;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    std::size_t momentum_switch_iter = 250;
    std::uint64_t seed = 1;
};

struct TsneResult {
    Tensor layout;                 // [n,2]
    std::vector<double> kl_trace;  // KL(P||Q) against the un-exaggerated P, one entry per iteration
};

// Exact O(n^2) t-SNE: per-point bandwidths found by binary search to match
// the perplexity, symmetrized affinities, Student-t low-dimensional kernel,
// gradient descent with gains, momentum and early exaggeration. Requires
// n <= 2000 and perplexity < n/3.
TsneResult tsne(const Tensor& points, const TsneConfig& config);

}  // namespace nst
