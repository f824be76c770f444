#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "superbranch/mechanism.hpp"
#include "superbranch/motion.hpp"
#include "superbranch/rng.hpp"

namespace superbranch {

// epsilon-mass particle path of a quadratic-mechanism superprocess: atoms of
// equal mass epsilon, critical binary branching at rate 2 alpha(x)/epsilon,
// independent birth at rate beta+(x) and death at rate beta-(x), exact motion
// between events.
struct EnsemblePath {
    int dim = 1;
    double epsilon = 0.0;
    std::vector<double> record_times;
    std::vector<std::vector<double>> atoms;   // per record time, stride dim
    std::size_t atoms_spawned = 0;
    std::size_t horizon_count = 0;            // lineages alive at the horizon
    double last_death = 0.0;                  // extinction time when extinct
    bool truncated = false;

    bool extinct_by_horizon() const { return horizon_count == 0 && !truncated; }
    std::size_t count(std::size_t record) const {
        return atoms[record].size() / static_cast<std::size_t>(dim);
    }
    double total_mass(std::size_t record) const {
        return epsilon * static_cast<double>(count(record));
    }
};

struct SuperParams {
    double epsilon = 0.05;
    double horizon = 1.0;
    std::vector<double> record_times;
    std::size_t atom_cap = 10'000'000;
};

// Deterministic rounding of a measure into mass-epsilon atoms at its atom
// locations.
std::vector<double> seed_atoms(std::span<const WeightedAtom> mu, double epsilon, int dim);

EnsemblePath simulate_superprocess(const BranchingMechanism& mech, const MotionModel& motion,
                                   std::span<const double> init_positions,
                                   const SuperParams& params, std::uint64_t seed,
                                   std::uint64_t replica);

// Same scheme under the tilted mechanism (beta*, alpha); pi must vanish.
EnsemblePath simulate_tilted(const BranchingMechanism& mech, double w,
                             const MotionModel& motion,
                             std::span<const double> init_positions, const SuperParams& params,
                             std::uint64_t seed, std::uint64_t replica);

// True if any lineage reaches the horizon; early-exits on the first survivor,
// so extinction-by-horizon statistics cost only the dying paths.
bool ensemble_survives(const BranchingMechanism& mech, const MotionModel& motion,
                       std::span<const double> init_positions, double epsilon, double horizon,
                       std::size_t atom_cap, std::uint64_t seed, std::uint64_t replica);

// <f, X_t> = epsilon sum f(atom).
double ensemble_integral(const EnsemblePath& path, std::size_t record,
                         const std::function<double(std::span<const double>)>& f);

struct WEstimateRow {
    double horizon = 0.0;
    double extinct_fraction = 0.0;
    double w_hat = 0.0;
    double se = 0.0;              // delta-method SE of w_hat
    bool lower_bound = false;     // no extinctions observed: w_hat is a bound
};

struct WEstimate {
    std::vector<WEstimateRow> rows;
    int replicas = 0;
};

// w(x) = -log P_{delta_x}(extinction): extinct-by-T fraction from 1/epsilon
// atoms at x, reported over an increasing horizon list.
WEstimate estimate_w(const BranchingMechanism& mech, const MotionModel& motion,
                     std::span<const double> x, std::span<const double> horizons,
                     double epsilon, int replicas, std::size_t atom_cap, std::uint64_t seed);

}  // namespace superbranch
