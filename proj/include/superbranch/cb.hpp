#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "superbranch/mechanism.hpp"
#include "superbranch/rng.hpp"

namespace superbranch {

// v_t(lambda) solving  dv/dt = -psi(v), v_0 = lambda, clamped at 0.
struct CumulantSolution {
    double lambda0 = 0.0;
    std::vector<double> t;
    std::vector<double> v;
    std::uint64_t steps = 0;
    double max_local_error = 0.0;
};

double cumulant(const BranchingMechanism& mech, double lambda, double t);

CumulantSolution cumulant_path(const BranchingMechanism& mech, double lambda,
                               std::span<const double> times);

struct VbarResult {
    double value = 0.0;       // vbar_t = lim_{lambda -> inf} v_t(lambda)
    double err_estimate = 0.0;
};

// Richardson extrapolation of v_t(lambda) over lambda in {1e2, 1e3, 1e4}.
// Requires Grey's condition.
VbarResult extinction_vbar(const BranchingMechanism& mech, double t);

// P(Y_t = 0 | Y_0 = y0) = exp(-y0 vbar_t).
double extinction_by(const BranchingMechanism& mech, double t, double y0);

// P(Y_t = 0 for some t | Y_0 = y0) = exp(-y0 z_psi); requires z_psi < inf.
double extinction_prob(const BranchingMechanism& mech, double y0);

// Euler-Maruyama path of dY = beta Y dt + sqrt(2 alpha Y) dW with absorption
// at zero; quadratic mechanisms only (pi = 0).
struct CbPath {
    std::vector<double> t;
    std::vector<double> y;
    bool extinct = false;
    double extinct_time = 0.0;
};

CbPath simulate_cb(const BranchingMechanism& mech, double y0, double horizon, double dt,
                   Rng& rng);

struct LaplaceCheck {
    double empirical = 0.0;
    double se = 0.0;
    double analytic = 0.0;
    double z = 0.0;
};

LaplaceCheck laplace_check(const BranchingMechanism& mech, double lambda, double t, double y0,
                           int replicas, double dt, std::uint64_t seed);

}  // namespace superbranch
