#include "nst/tsne.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nst/rng.hpp"

namespace nst {

namespace {

constexpr double kTinyP = 1e-12;

// Conditional affinities p_{j|i} for one row at the given beta = 1/(2 sigma^2);
// returns the Shannon entropy.
double row_affinities(const std::vector<double>& d2, std::size_t i, double beta, std::vector<double>* p) {
    const std::size_t n = p->size();
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double v = j == i ? 0.0 : std::exp(-beta * d2[i * n + j]);
        (*p)[j] = v;
        sum += v;
    }
    if (sum <= 0.0) return 0.0;
    double entropy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        (*p)[j] /= sum;
        if ((*p)[j] > 0.0) entropy -= (*p)[j] * std::log((*p)[j]);
    }
    return entropy;
}

}  // namespace

TsneResult tsne(const Tensor& points, const TsneConfig& config) {
    if (points.rank() != 2) throw std::invalid_argument("tsne expects an [n,d] matrix");
    const std::size_t n = points.extent(0), d = points.extent(1);
    if (n > 2000) throw std::invalid_argument("tsne is exact O(n^2); n must be <= 2000");
    if (n < 2) throw std::invalid_argument("tsne needs at least 2 points");
    if (!(config.perplexity > 0.0) || config.perplexity >= static_cast<double>(n) / 3.0) {
        throw std::invalid_argument("perplexity must satisfy 0 < perplexity < n/3");
    }

    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = points.at2(i, k) - points.at2(j, k);
                s += diff * diff;
            }
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }

    // Per-point bandwidth via binary search on the entropy.
    const double target_entropy = std::log(config.perplexity);
    std::vector<double> p_cond(n * n, 0.0);
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 50; ++it) {
            const double entropy = row_affinities(d2, i, beta, &row);
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-7) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = beta_lo == 0.0 ? beta * 0.5 : 0.5 * (beta + beta_lo);
            }
        }
        row_affinities(d2, i, beta, &row);
        for (std::size_t j = 0; j < n; ++j) p_cond[i * n + j] = row[j];
    }

    // Symmetrize and floor.
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            p[i * n + j] = std::max((p_cond[i * n + j] + p_cond[j * n + i]) / (2.0 * static_cast<double>(n)), kTinyP);
        }
        p[i * n + i] = kTinyP;
    }

    Rng rng(config.seed);
    Tensor y(Shape{n, 2});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1e-4 * rng.normal();

    std::vector<double> velocity(n * 2, 0.0);
    std::vector<double> gains(n * 2, 1.0);
    std::vector<double> q(n * n, 0.0);
    std::vector<double> grad(n * 2, 0.0);

    TsneResult result;
    result.kl_trace.reserve(config.iters);

    for (std::size_t iter = 0; iter < config.iters; ++iter) {
        const double exaggeration = iter < config.exaggeration_iters ? config.early_exaggeration : 1.0;
        const double momentum = iter < config.momentum_switch_iter ? config.momentum_initial : config.momentum_final;

        // Student-t affinities in the embedding.
        double qsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dy0 = y.at2(i, 0) - y.at2(j, 0);
                const double dy1 = y.at2(i, 1) - y.at2(j, 1);
                const double w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                q[i * n + j] = w;
                q[j * n + i] = w;
                qsum += 2.0 * w;
            }
            q[i * n + i] = 0.0;
        }

        // KL divergence against the true (un-exaggerated) P.
        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double pij = p[i * n + j];
                const double qij = std::max(q[i * n + j] / qsum, kTinyP);
                kl += pij * std::log(pij / qij);
            }
        }
        result.kl_trace.push_back(kl);

        for (std::size_t i = 0; i < n; ++i) {
            double g0 = 0.0, g1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double w = q[i * n + j];
                const double coeff = 4.0 * (exaggeration * p[i * n + j] - w / qsum) * w;
                g0 += coeff * (y.at2(i, 0) - y.at2(j, 0));
                g1 += coeff * (y.at2(i, 1) - y.at2(j, 1));
            }
            grad[i * 2] = g0;
            grad[i * 2 + 1] = g1;
        }

        for (std::size_t k = 0; k < n * 2; ++k) {
            const bool same_sign = (grad[k] > 0.0) == (velocity[k] > 0.0);
            gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            velocity[k] = momentum * velocity[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }

        // Re-center.
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += y.at2(i, 0);
            m1 += y.at2(i, 1);
        }
        m0 /= static_cast<double>(n);
        m1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y.at2(i, 0) -= m0;
            y.at2(i, 1) -= m1;
        }
    }

    result.layout = std::move(y);
    return result;
}

}  // namespace nst
