#pragma once

#include <span>
#include <string>

#include "superbranch/functions.hpp"
#include "superbranch/mechanism.hpp"
#include "superbranch/rng.hpp"

namespace superbranch {

enum class MotionKind { InwardOu, OutwardOu };

// Spatial motion with an exact transition sampler and a transition density
// with respect to its symmetrizing measure m. Only exact-sampler motions
// ship; there is no time-discretization of the spatial part anywhere.
struct MotionModel {
    MotionKind kind = MotionKind::InwardOu;
    int dim = 1;
    double c = 1.0;
    std::string name;

    // Killing attached by the w-transform; rate gamma(x) >= 0, thinning bound
    // kill_sup. killed == false means gamma is identically zero.
    bool killed = false;
    Field kill_rate = Field(0.0);
    double kill_sup = 0.0;

    double step_decay(double dt) const;
    double step_var(double dt) const;

    void step(std::span<const double> x, double dt, Rng& rng, std::span<double> out) const;

    double transition_density(double t, std::span<const double> x,
                              std::span<const double> y) const;

    double m_density(std::span<const double> x) const;
};

MotionModel inward_ou(double c, int d);
MotionModel outward_ou(double c, int d);

// E_x[f(xi_t)] in closed form for the supported test functions.
double ou_expectation(const MotionModel& motion, const TestFunction& f,
                      std::span<const double> x, double t);

// P^beta_t f(x) = e^{beta t} E_x[f(xi_t)] for spatially constant beta.
double pbeta_expectation(const MotionModel& motion, double beta, const TestFunction& f,
                         std::span<const double> x, double t);

enum class ExampleId { InwardOuQuadratic, OutwardOuGaussian };

// Principal eigenvalue, eigenfunction and companions for the two analytic
// example models.
struct SpectralData {
    ExampleId example = ExampleId::InwardOuQuadratic;
    int dim = 1;
    double c = 1.0;
    double lambda1 = 0.0;    // principal eigenvalue of the generator pair
    double lambda_h = 0.0;   // spectral gap of the h-transformed motion
    double w = 0.0;          // martingale function, constant z_psi

    double h(std::span<const double> x) const;
    double m_density(std::span<const double> x) const;
    // h^2 m: the stationary density of the h-transformed motion.
    double h2m_density(std::span<const double> x) const;
};

SpectralData spectral_for_example(ExampleId example, double c, int d,
                                  const BranchingMechanism& mech);

// Doob h-transform of the motion: Example 8.1's model is invariant, the
// outward model maps to the inward one.
MotionModel h_transform(const MotionModel& motion, const BranchingMechanism& mech,
                        const SpectralData& spectral);

// Feynman-Kac reweighted estimate of P^h_t f(x) sampled under the base
// motion: weight e^{(lambda1 + beta) t} h(xi_t)/h(x). Generic route for
// motions without an analytic h-transform; variance reported alongside.
struct ReweightedEstimate {
    double mean = 0.0;
    double se = 0.0;
};

ReweightedEstimate h_reweighted_expectation(const MotionModel& motion,
                                            const SpectralData& spectral, double beta,
                                            const TestFunction& f, std::span<const double> x,
                                            double t, int samples, std::uint64_t seed);

// w-transform: kill rate gamma(x) = psi_beta(x, w)/w. Identity when gamma
// vanishes; rejects configurations where gamma takes negative values.
MotionModel w_transform(const MotionModel& motion, const BranchingMechanism& mech, double w);

// Transition density of the h-transformed motion for the example models
// (an inward OU kernel with respect to its stationary Gaussian measure).
double ph_density(double c, int d, double t, std::span<const double> x,
                  std::span<const double> y);

double a_tilde(double c, int d, double t, std::span<const double> x);

}  // namespace superbranch
