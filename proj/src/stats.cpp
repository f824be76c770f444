#include "superbranch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace superbranch {

Summary summarize(std::span<const double> samples) {
    Summary s;
    s.n = samples.size();
    if (s.n == 0) {
        return s;
    }
    double sum = 0.0;
    for (double v : samples) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(s.n);
    if (s.n == 1) {
        return s;
    }
    double ss = 0.0;
    double s4 = 0.0;
    for (double v : samples) {
        const double d = v - s.mean;
        ss += d * d;
        s4 += d * d * d * d;
    }
    s.var = ss / static_cast<double>(s.n - 1);
    s.sd = std::sqrt(s.var);
    s.se = s.sd / std::sqrt(static_cast<double>(s.n));
    s.m4 = s4 / static_cast<double>(s.n);
    return s;
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double z_score(double mc_mean, double se, double target) {
    if (se == 0.0) {
        return mc_mean == target ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return (mc_mean - target) / se;
}

double variance_se(std::span<const double> samples) {
    const Summary s = summarize(samples);
    if (s.n < 2) {
        return 0.0;
    }
    const double n = static_cast<double>(s.n);
    // Var(s^2) = (m4 - (n-3)/(n-1) s^4) / n
    const double v = (s.m4 - (n - 3.0) / (n - 1.0) * s.var * s.var) / n;
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

double binomial_se(double p_hat, std::size_t n) {
    if (n == 0) {
        return 0.0;
    }
    return std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) / static_cast<double>(n));
}

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) {
        return 1.0;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) {
            break;
        }
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) {
        throw std::invalid_argument("ks_test: empty sample");
    }
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
        d = std::max(d, f - static_cast<double>(i) / n);
    }
    KsResult r;
    r.d = d;
    const double sn = std::sqrt(n);
    r.lambda = (sn + 0.12 + 0.11 / sn) * d;
    r.p_value = kolmogorov_q(r.lambda);
    return r;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ks_two_sample: empty sample");
    }
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    double d = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) {
            ++i;
        }
        while (j < y.size() && y[j] <= v) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    KsResult r;
    r.d = d;
    const double ne = nx * ny / (nx + ny);
    const double sn = std::sqrt(ne);
    r.lambda = (sn + 0.12 + 0.11 / sn) * d;
    r.p_value = kolmogorov_q(r.lambda);
    return r;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("linear_fit: need matching samples, n >= 3");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("linear_fit: degenerate regressor");
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    const double s2 = rss / (n - 2.0);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    return f;
}

BootstrapCi bootstrap_ci(std::size_t n_samples,
                         const std::function<double(std::span<const std::size_t>)>& statistic,
                         double level, int resamples, Rng& rng) {
    if (n_samples == 0 || resamples < 10) {
        throw std::invalid_argument("bootstrap_ci: need samples and >=10 resamples");
    }
    std::vector<std::size_t> idx(n_samples);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    BootstrapCi ci;
    ci.estimate = statistic(idx);
    std::vector<double> stats(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < n_samples; ++i) {
            idx[i] = static_cast<std::size_t>(rng.next_u64() % n_samples);
        }
        stats[static_cast<std::size_t>(b)] = statistic(idx);
    }
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - level) / 2.0;
    const auto pick = [&](double q) {
        const double pos = q * (static_cast<double>(stats.size()) - 1.0);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, stats.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    ci.lo = pick(tail);
    ci.hi = pick(1.0 - tail);
    return ci;
}

}  // namespace superbranch
