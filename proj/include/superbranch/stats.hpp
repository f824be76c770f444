#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "superbranch/rng.hpp"

namespace superbranch {

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double var = 0.0;   // unbiased sample variance
    double sd = 0.0;
    double se = 0.0;    // standard error of the mean
    double m4 = 0.0;    // central fourth moment (biased, for var-of-var)
};

Summary summarize(std::span<const double> samples);

double normal_cdf(double x);

// z statistic of a Monte Carlo mean against a fixed target.
double z_score(double mc_mean, double se, double target);

// Standard error of the unbiased sample variance, via the fourth moment.
double variance_se(std::span<const double> samples);

double binomial_se(double p_hat, std::size_t n);

// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
double kolmogorov_q(double lambda);

struct KsResult {
    double d = 0.0;
    double lambda = 0.0;
    double p_value = 1.0;
};

// One-sample KS against a continuous CDF (Stephens' finite-n correction).
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_se = 0.0;
    double slope_se = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct BootstrapCi {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap CI for a statistic of (resampled) replica indices.
BootstrapCi bootstrap_ci(std::size_t n_samples,
                         const std::function<double(std::span<const std::size_t>)>& statistic,
                         double level, int resamples, Rng& rng);

}  // namespace superbranch
