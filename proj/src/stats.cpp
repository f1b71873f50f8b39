#include "nst/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nst {

double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) { return percentile(std::move(xs), 50.0); }

double sample_stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double percentile(std::vector<double> xs, double pct) {
    if (xs.empty()) throw std::invalid_argument("percentile of empty sample");
    if (pct < 0.0 || pct > 100.0) throw std::invalid_argument("percentile must lie in [0, 100]");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * pct / 100.0;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = h - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

SummaryStats summarize(const std::vector<double>& xs) {
    SummaryStats s;
    s.n = xs.size();
    s.mean = mean_of(xs);
    s.median = median_of(xs);
    s.stddev = sample_stddev(xs);
    s.p10 = percentile(xs, 10.0);
    s.q25 = percentile(xs, 25.0);
    s.q75 = percentile(xs, 75.0);
    s.p90 = percentile(xs, 90.0);
    return s;
}

Regression linear_regression(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("regression inputs differ in length");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("regression needs at least 2 points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("regression x values are constant");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    if (syy == 0.0) {
        r.r2 = 1.0;  // constant y fit exactly by slope 0
        return r;
    }
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (r.slope * x[i] + r.intercept);
        ss_res += e * e;
    }
    r.r2 = 1.0 - ss_res / syy;
    return r;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0.0) throw std::invalid_argument("degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return reg_inc_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired t-test needs equal-length samples");
    if (a.size() < 2) throw std::invalid_argument("paired t-test needs n >= 2");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double md = mean_of(d);
    const double sd = sample_stddev(d);
    TTestResult r;
    if (sd == 0.0) {
        if (md == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), md);
            r.p = 0.0;
        }
        return r;
    }
    r.t = md / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided_p(r.t, static_cast<double>(n - 1));
    return r;
}

void symmetric_eigen(std::vector<double> a, std::size_t n, std::vector<double>* values,
                     std::vector<double>* vectors) {
    if (a.size() != n * n) throw std::invalid_argument("symmetric_eigen matrix size mismatch");
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    auto off_norm = [&a, n]() {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
        return s;
    };
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[i * n + j]));
    const double tol = (scale == 0.0 ? 1.0 : scale) * 1e-15;

    for (int sweep = 0; sweep < 64 && off_norm() > tol * tol * static_cast<double>(n * n); ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double app = a[p * n + p], aqq = a[q * n + q];
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&a, n](std::size_t i, std::size_t j) {
        return a[i * n + i] > a[j * n + j];
    });
    values->resize(n);
    vectors->assign(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        (*values)[r] = a[order[r] * n + order[r]];
        for (std::size_t k = 0; k < n; ++k) (*vectors)[r * n + k] = v[k * n + order[r]];
    }
}

PcaResult pca(const std::vector<std::vector<double>>& data, std::size_t k) {
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("pca needs at least 2 samples");
    const std::size_t d = data[0].size();
    for (const auto& row : data) {
        if (row.size() != d) throw std::invalid_argument("pca rows differ in dimension");
    }
    if (k > std::min(d, n - 1)) {
        throw std::invalid_argument("pca k must satisfy k <= min(dim, n-1)");
    }

    PcaResult out;
    out.mean.assign(d, 0.0);
    for (const auto& row : data)
        for (std::size_t j = 0; j < d; ++j) out.mean[j] += row[j];
    for (double& m : out.mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> centered(n, std::vector<double>(d));
    double total_var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            centered[i][j] = data[i][j] - out.mean[j];
            total_var += centered[i][j] * centered[i][j];
        }
    total_var /= static_cast<double>(n - 1);
    out.total_variance = total_var;

    std::vector<double> values;
    std::vector<double> vectors;
    std::vector<std::vector<double>> comps;
    if (total_var == 0.0) {
        out.degenerate = true;
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<double> e(d, 0.0);
            e[r] = 1.0;
            comps.push_back(std::move(e));
        }
        out.explained_variance.assign(k, 0.0);
    } else if (d <= n) {
        // Direct covariance route.
        std::vector<double> cov(d * d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < d; ++p)
                for (std::size_t q = p; q < d; ++q) cov[p * d + q] += centered[i][p] * centered[i][q];
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p; q < d; ++q) {
                cov[p * d + q] /= static_cast<double>(n - 1);
                cov[q * d + p] = cov[p * d + q];
            }
        symmetric_eigen(std::move(cov), d, &values, &vectors);
        for (std::size_t r = 0; r < k; ++r) {
            comps.emplace_back(vectors.begin() + static_cast<std::ptrdiff_t>(r * d),
                               vectors.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
            out.explained_variance.push_back(std::max(values[r], 0.0));
        }
    } else {
        // Dual (Gram) route for wide data: eigenvectors of X X^T map back to
        // feature space via X^T u.
        std::vector<double> gram(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < d; ++p) s += centered[i][p] * centered[j][p];
                gram[i * n + j] = s;
                gram[j * n + i] = s;
            }
        symmetric_eigen(std::move(gram), n, &values, &vectors);
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<double> comp(d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = vectors[r * n + i];
                for (std::size_t p = 0; p < d; ++p) comp[p] += u * centered[i][p];
            }
            double norm = 0.0;
            for (double c : comp) norm += c * c;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (double& c : comp) c /= norm;
            } else {
                // Zero-variance direction; use a canonical axis.
                comp.assign(d, 0.0);
                comp[r % d] = 1.0;
            }
            comps.push_back(std::move(comp));
            out.explained_variance.push_back(std::max(values[r], 0.0) / static_cast<double>(n - 1));
        }
    }
    out.components = std::move(comps);

    out.projections.assign(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < k; ++r) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) s += centered[i][p] * out.components[r][p];
            out.projections[i][r] = s;
        }
    return out;
}

}  // namespace nst
