#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace superbranch {

// Nodes and weights of n-point Gauss-Legendre on [-1,1], computed by Newton
// iteration on the Legendre recurrence.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline const GaussRule& gauss_legendre_16() {
    static const GaussRule rule = [] {
        constexpr int n = 16;
        GaussRule r;
        r.nodes.resize(n);
        r.weights.resize(n);
        for (int i = 0; i < n; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0;
                double p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) {
                    break;
                }
            }
            r.nodes[static_cast<std::size_t>(i)] = x;
            r.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        return r;
    }();
    return rule;
}

// Composite Gauss-Legendre over [a,b] with the given number of panels.
template <class F>
double integrate(F&& f, double a, double b, int panels = 32) {
    if (!(b >= a)) {
        throw std::invalid_argument("integrate: b < a");
    }
    if (a == b) {
        return 0.0;
    }
    const GaussRule& rule = gauss_legendre_16();
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            acc += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
        }
        total += 0.5 * h * acc;
    }
    return total;
}

struct RefinedIntegral {
    double value = 0.0;
    double rel_err = 0.0;   // |coarse - fine| / max(|fine|, tiny)
    bool converged = false;
};

// Integrates at two resolutions and reports the refinement gap.
template <class F>
RefinedIntegral integrate_refined(F&& f, double a, double b, int panels = 32,
                                  double rel_tol = 1e-8) {
    RefinedIntegral r;
    const double coarse = integrate(f, a, b, panels);
    r.value = integrate(f, a, b, 2 * panels);
    const double scale = std::max(std::abs(r.value), 1e-300);
    r.rel_err = std::abs(r.value - coarse) / scale;
    r.converged = r.rel_err <= rel_tol;
    return r;
}

}  // namespace superbranch
