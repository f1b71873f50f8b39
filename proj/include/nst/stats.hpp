#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nst {

double mean_of(std::span<const double> xs);
double median_of(std::vector<double> xs);
// Sample standard deviation (n-1 divisor); 0 for n < 2.
double sample_stddev(std::span<const double> xs);

// Percentile in [0,100] with linear interpolation between order statistics:
// rank h = (n-1) * pct / 100.
double percentile(std::vector<double> xs, double pct);

struct SummaryStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;
    double p10 = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double p90 = 0.0;
};

SummaryStats summarize(const std::vector<double>& xs);

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// Least-squares fit y = slope * x + intercept with r^2 = 1 - SS_res/SS_tot.
// Requires n >= 2 and non-constant x.
Regression linear_regression(std::span<const double> x, std::span<const double> y);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

// Paired two-sided t-test: t = mean(d) / (stddev(d)/sqrt(n)) with sample
// stddev. All-zero differences give t=0, p=1; zero variance with nonzero
// mean gives t = +/-infinity, p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

double student_t_two_sided_p(double t, double dof);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_inc_beta(double a, double b, double x);

// Eigendecomposition of a dense symmetric matrix (row-major n x n) by cyclic
// Jacobi rotations. Eigenvalues sorted descending; row i of `vectors` is the
// unit eigenvector of values[i].
void symmetric_eigen(std::vector<double> a, std::size_t n, std::vector<double>* values,
                     std::vector<double>* vectors);

struct PcaResult {
    std::vector<double> mean;
    std::vector<std::vector<double>> components;  // k rows, orthonormal
    std::vector<double> explained_variance;       // non-increasing, n-1 divisor
    std::vector<std::vector<double>> projections;  // n rows of k coordinates
    double total_variance = 0.0;
    bool degenerate = false;  // all-equal input; components fall back to canonical axes
};

// Principal components of n samples of dimension d; k <= min(d, n-1).
PcaResult pca(const std::vector<std::vector<double>>& data, std::size_t k);

}  // namespace nst
