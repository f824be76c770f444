#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "superbranch/functions.hpp"
#include "superbranch/mechanism.hpp"
#include "superbranch/motion.hpp"
#include "superbranch/skeleton.hpp"
#include "superbranch/stats.hpp"
#include "superbranch/superfield.hpp"

namespace superbranch {

// One unit of the excursion measure, approximated by an epsilon-seeded start:
// a single mass-epsilon atom evolved under the given mechanism. Immigration
// streams spawn these at rate 2 alpha(x)/epsilon.
EnsemblePath sample_excursion_approx(std::span<const double> start_x,
                                     const BranchingMechanism& mech, const MotionModel& motion,
                                     double epsilon, double horizon,
                                     std::span<const double> record_times, std::uint64_t seed,
                                     std::uint64_t replica);

struct SpineOptions {
    double horizon = 1.0;
    std::vector<double> record_times;
    double epsilon = 0.05;
    std::size_t atom_cap = 10'000'000;
};

// A realization of the size-biased measure: spine path, Poisson immigration
// along it, and an independent copy of the superprocess; functionals of the
// assembled measure Gamma_t next to their conditional-mean predictors.
struct SpineRealization {
    std::vector<double> record_times;
    std::vector<std::vector<double>> gamma;       // [record][f]: <f, Gamma_t>
    std::vector<std::vector<double>> predictor;   // [record][f]: analytic conditional mean
    std::vector<double> w_mart;                   // [record]: e^{lambda1 t} <h, Gamma_t>
    std::vector<double> spine_times;              // immigration-event times along the spine
    std::vector<double> spine_positions;          // positions there, stride dim
    std::vector<double> dn_times;
    std::vector<double> dm_times;
    std::vector<double> dm_masses;                // masses actually seeded
    bool truncated = false;
};

SpineRealization spine_sample(const BranchingMechanism& mech, const MotionModel& motion,
                              const SpectralData& spectral, std::span<const WeightedAtom> mu,
                              std::span<const TestFunction> fs, const SpineOptions& opts,
                              std::uint64_t seed, std::uint64_t replica);

struct DressOptions {
    double horizon = 1.0;
    std::vector<double> record_times;
    double epsilon = 0.05;
    std::size_t atom_cap = 10'000'000;
    std::size_t particle_cap = 10'000'000;
    std::vector<TestFunction> fs;
    std::vector<double> bin_edges;   // coordinate-0 bins for the thinning test
};

// Skeleton dressing X^ = X* + I for quadratic mechanisms: a subcritical
// tilted field plus continuous immigration along the skeleton branches.
struct DressRealization {
    std::vector<double> record_times;
    std::vector<double> z_count;
    std::vector<double> w_skeleton;                 // W^{h/w}_t(Z)
    std::vector<double> xhat_mass;
    std::vector<double> xstar_mass;
    std::vector<double> w_hat;                      // e^{lambda1 t} <h, X^_t>
    std::vector<std::vector<double>> xhat_f;        // [record][f]
    std::vector<std::vector<double>> xstar_f;       // [record][f]
    std::vector<std::vector<double>> z_bin_count;   // [record][bin]
    std::vector<std::vector<double>> xhat_bin_mass; // [record][bin]
    std::size_t immigrants = 0;
    bool truncated = false;
};

DressRealization dress_replica(const BranchingMechanism& mech, double w,
                               const MotionModel& motion, const SpectralData& spectral,
                               std::span<const WeightedAtom> mu, const DressOptions& opts,
                               std::uint64_t seed, std::uint64_t replica);

struct ThinningReport {
    double dispersion = 0.0;
    BootstrapCi ci;
    double mean_count = 0.0;
    double mean_wmass = 0.0;
    double mean_match_z = 0.0;
    bool ci_contains_one = false;
};

// Conditional dispersion of skeleton counts against w * dressed mass: for a
// Poisson random measure the residual N - wM has variance E[wM], so the
// pooled-over-bins ratio concentrates at 1.
ThinningReport thinning_test(const std::vector<std::vector<double>>& counts_by_bin,
                             const std::vector<std::vector<double>>& wmass_by_bin,
                             double level, int resamples, Rng& rng);

}  // namespace superbranch
