#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "superbranch/functions.hpp"
#include "superbranch/mechanism.hpp"
#include "superbranch/motion.hpp"
#include "superbranch/rng.hpp"

namespace superbranch {

struct Particle {
    std::int32_t parent = -1;       // index into the particle list, -1 for roots
    std::int32_t child_slot = 0;    // 1-based slot among siblings (Ulam-Harris digit)
    double birth = 0.0;
    double death = std::numeric_limits<double>::infinity();   // open if beyond horizon
    std::int32_t n_children = 0;
    bool killed = false;            // removed by motion killing, no offspring
    std::int64_t birth_pos = -1;    // arena offsets, units of dim
    std::int64_t death_pos = -1;
};

struct SnapshotEntry {
    std::int32_t particle = 0;
    std::int64_t pos = 0;
};

struct MarkEvent {
    std::int32_t particle = 0;
    double time = 0.0;
    std::int64_t pos = 0;
};

// Ulam-Harris labelled branching particle system.
struct SkeletonTree {
    int dim = 1;
    double horizon = 0.0;
    std::vector<Particle> particles;
    std::vector<double> arena;                        // positions, stride dim
    std::vector<double> record_times;
    std::vector<std::vector<SnapshotEntry>> snapshots;  // one list per record time
    std::vector<MarkEvent> marks;                     // immigration marks (dressing)
    bool truncated = false;

    std::span<const double> position(std::int64_t offset) const {
        return {arena.data() + offset * dim, static_cast<std::size_t>(dim)};
    }

    std::string label(std::size_t particle) const;
    std::size_t alive_count(double t) const;
    std::size_t record_index(double t) const;   // throws if t is not a record time
};

struct SkeletonParams {
    double horizon = 1.0;
    std::vector<double> record_times;
    std::size_t particle_cap = 10'000'000;
    double mark_rate = 0.0;     // immigration mark intensity along branches
};

// Branching law of the skeleton: constant, or position dependent with a
// caller-supplied thinning bound sup_x q(x).
struct SkeletonLawSpec {
    SkeletonLaw law;
    bool spatial = false;
    std::function<SkeletonLaw(std::span<const double>)> at;
    double q_bar = 0.0;

    static SkeletonLawSpec constant(SkeletonLaw l) {
        SkeletonLawSpec s;
        s.law = std::move(l);
        return s;
    }
    static SkeletonLawSpec varying(std::function<SkeletonLaw(std::span<const double>)> f,
                                   double q_bar_in) {
        SkeletonLawSpec s;
        s.spatial = true;
        s.at = std::move(f);
        s.q_bar = q_bar_in;
        return s;
    }
};

// Event-driven simulation with exponential clocks; the motion is sampled
// exactly at event, record and mark times only.
SkeletonTree simulate_skeleton(const MotionModel& motion_w, const SkeletonLawSpec& law,
                               std::span<const double> init_positions,
                               const SkeletonParams& params, std::uint64_t seed,
                               std::uint64_t replica);

// Poisson(w mu) initial condition: returns positions, stride = dimension.
std::vector<double> init_poisson(std::span<const WeightedAtom> mu, const Field& w, int dim,
                                 Rng& rng);

// <f, Z_t> over the snapshot at a record time.
double population_integral(const SkeletonTree& tree, double t,
                           const std::function<double(std::span<const double>)>& f);

// W^{h/w}_t(Z) = e^{lambda1 t} <h/w, Z_t>.
double martingale_W(const SkeletonTree& tree, double t, const SpectralData& spectral);

struct LlnStatistic {
    double value = 0.0;
    bool defined = false;   // false when the population at t is empty
};

// <phi h/w, Z_t> / <h/w, Z_t>.
LlnStatistic lln_statistic(const SkeletonTree& tree, const TestFunction& phi, double t,
                           const SpectralData& spectral);

struct ManyToOneResult {
    double mc_mean = 0.0;
    double se = 0.0;
    double analytic = 0.0;
    double z = 0.0;
};

// Monte Carlo <f, Z_t> from single-particle starts against the many-to-one
// value (1/w) P^beta_t(w f)(x); constant w and beta.
ManyToOneResult many_to_one_estimate(std::span<const SkeletonTree> trees,
                                     const TestFunction& f, double t,
                                     const MotionModel& base_motion, double beta, double w,
                                     std::span<const double> x0);

}  // namespace superbranch
