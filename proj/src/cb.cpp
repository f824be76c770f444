#include "superbranch/cb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "superbranch/stats.hpp"

namespace superbranch {

namespace {

// Dormand-Prince 5(4) step for the scalar flow dv/dt = -psi(v).
struct DopriResult {
    double v5 = 0.0;
    double err = 0.0;
};

DopriResult dopri_step(const BranchingMechanism& mech, double v, double h) {
    const auto f = [&mech](double u) { return -mech.psi(std::max(u, 0.0)); };
    const double k1 = f(v);
    const double k2 = f(v + h * (1.0 / 5.0) * k1);
    const double k3 = f(v + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    const double k4 = f(v + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    const double k5 = f(v + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 +
                                 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4));
    const double k6 = f(v + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 +
                                 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4 -
                                 5103.0 / 18656.0 * k5));
    const double v5 = v + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 -
                               2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    const double k7 = f(v5);
    const double v4 = v + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 +
                               393.0 / 640.0 * k4 - 92097.0 / 339200.0 * k5 +
                               187.0 / 2100.0 * k6 + 1.0 / 40.0 * k7);
    return {v5, std::abs(v5 - v4)};
}

constexpr double kRelTol = 1e-10;
constexpr double kAbsTol = 1e-13;

}  // namespace

CumulantSolution cumulant_path(const BranchingMechanism& mech, double lambda,
                               std::span<const double> times) {
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("cumulant: mechanism must be spatially constant");
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("cumulant: lambda must be nonnegative");
    }
    CumulantSolution sol;
    sol.lambda0 = lambda;
    sol.t.assign(times.begin(), times.end());
    sol.v.resize(sol.t.size());
    if (!std::is_sorted(sol.t.begin(), sol.t.end()) || (!sol.t.empty() && sol.t.front() < 0.0)) {
        throw std::invalid_argument("cumulant: times must be sorted and nonnegative");
    }

    double t = 0.0;
    double v = lambda;
    double h = 1e-4;
    for (std::size_t i = 0; i < sol.t.size(); ++i) {
        const double target = sol.t[i];
        while (t < target) {
            if (v <= 0.0) {
                v = 0.0;
                break;   // absorbed; psi(0) = 0 keeps it there
            }
            double step = std::min(h, target - t);
            for (int attempt = 0; attempt < 200; ++attempt) {
                const DopriResult r = dopri_step(mech, v, step);
                const double tol = kAbsTol + kRelTol * std::max(std::abs(v), std::abs(r.v5));
                if (r.err <= tol || step <= 1e-14) {
                    v = std::max(r.v5, 0.0);
                    t += step;
                    sol.max_local_error = std::max(sol.max_local_error, r.err);
                    ++sol.steps;
                    const double grow = r.err > 0.0
                                            ? 0.9 * std::pow(tol / r.err, 0.2)
                                            : 5.0;
                    h = step * std::clamp(grow, 0.2, 5.0);
                    break;
                }
                step *= std::max(0.1, 0.9 * std::pow(tol / r.err, 0.2));
                if (attempt == 199) {
                    throw std::runtime_error("cumulant: adaptive solver failed to converge");
                }
            }
            if (!std::isfinite(v)) {
                throw std::runtime_error("cumulant: solver diverged");
            }
        }
        sol.v[i] = v;
    }
    return sol;
}

double cumulant(const BranchingMechanism& mech, double lambda, double t) {
    if (t < 0.0) {
        throw std::invalid_argument("cumulant: t must be nonnegative");
    }
    if (lambda == 0.0) {
        return 0.0;
    }
    const double ts[1] = {t};
    return cumulant_path(mech, lambda, ts).v[0];
}

VbarResult extinction_vbar(const BranchingMechanism& mech, double t) {
    const GreyResult grey = grey_check(mech);
    if (!grey.holds) {
        throw std::runtime_error("extinction_vbar: Grey's condition fails; "
                                 "no finite-time extinction");
    }
    const double lambdas[3] = {1e2, 1e3, 1e4};
    double v[3];
    for (int i = 0; i < 3; ++i) {
        v[i] = cumulant(mech, lambdas[i], t);
    }
    // v(lambda) ~ vbar - c/lambda: eliminate the 1/lambda term pairwise.
    const auto extrap = [&](int i, int j) {
        return (v[j] * lambdas[j] - v[i] * lambdas[i]) / (lambdas[j] - lambdas[i]);
    };
    const double e01 = extrap(0, 1);
    const double e12 = extrap(1, 2);
    VbarResult out;
    out.value = e12;
    out.err_estimate = std::abs(e12 - e01);
    return out;
}

double extinction_by(const BranchingMechanism& mech, double t, double y0) {
    if (y0 < 0.0) {
        throw std::invalid_argument("extinction_by: y0 must be nonnegative");
    }
    if (y0 == 0.0) {
        return 1.0;
    }
    return std::exp(-y0 * extinction_vbar(mech, t).value);
}

double extinction_prob(const BranchingMechanism& mech, double y0) {
    if (y0 < 0.0) {
        throw std::invalid_argument("extinction_prob: y0 must be nonnegative");
    }
    const ZpsiResult z = root_zpsi(mech);
    if (z.infinite) {
        throw std::runtime_error("extinction_prob: z_psi is infinite");
    }
    return std::exp(-y0 * z.z);
}

CbPath simulate_cb(const BranchingMechanism& mech, double y0, double horizon, double dt,
                   Rng& rng) {
    if (!mech.spatially_constant() || !mech.jumps().is_zero()) {
        throw std::invalid_argument("simulate_cb: quadratic spatially constant mechanism required");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("simulate_cb: dt must be positive");
    }
    if (y0 < 0.0) {
        throw std::invalid_argument("simulate_cb: y0 must be nonnegative");
    }
    const double beta = mech.beta_const();
    const double alpha = mech.alpha_const();
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-12));
    CbPath path;
    path.t.reserve(n_steps + 1);
    path.y.reserve(n_steps + 1);
    double y = y0;
    path.t.push_back(0.0);
    path.y.push_back(y);
    if (y == 0.0) {
        path.extinct = true;
        path.extinct_time = 0.0;
    }
    for (std::size_t i = 1; i <= n_steps; ++i) {
        const double t = static_cast<double>(i) * dt;
        if (!path.extinct) {
            const double drift = beta * y * dt;
            const double diff = std::sqrt(2.0 * alpha * y * dt) * rng.normal();
            y += drift + diff;
            if (y <= 0.0) {
                y = 0.0;
                path.extinct = true;
                path.extinct_time = t;
            }
        }
        path.t.push_back(t);
        path.y.push_back(y);
    }
    return path;
}

LaplaceCheck laplace_check(const BranchingMechanism& mech, double lambda, double t, double y0,
                           int replicas, double dt, std::uint64_t seed) {
    if (replicas <= 0) {
        throw std::invalid_argument("laplace_check: replicas must be positive");
    }
    std::vector<double> vals(static_cast<std::size_t>(replicas));
    for (int r = 0; r < replicas; ++r) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(r), stream_tag::kCbPath);
        const CbPath path = simulate_cb(mech, y0, t, dt, rng);
        vals[static_cast<std::size_t>(r)] = std::exp(-lambda * path.y.back());
    }
    const Summary s = summarize(vals);
    LaplaceCheck out;
    out.empirical = s.mean;
    out.se = s.se;
    out.analytic = std::exp(-y0 * cumulant(mech, lambda, t));
    out.z = z_score(s.mean, s.se, out.analytic);
    return out;
}

}  // namespace superbranch
