#include "superbranch/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace superbranch {

std::string SkeletonTree::label(std::size_t particle) const {
    if (particle >= particles.size()) {
        throw std::out_of_range("SkeletonTree::label: no such particle");
    }
    std::vector<std::int32_t> digits;
    std::int32_t idx = static_cast<std::int32_t>(particle);
    while (particles[static_cast<std::size_t>(idx)].parent >= 0) {
        digits.push_back(particles[static_cast<std::size_t>(idx)].child_slot);
        idx = particles[static_cast<std::size_t>(idx)].parent;
    }
    std::string out = std::to_string(idx + 1);
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        out += '.';
        out += std::to_string(*it);
    }
    return out;
}

std::size_t SkeletonTree::alive_count(double t) const {
    std::size_t n = 0;
    for (const Particle& p : particles) {
        if (p.birth <= t && t < p.death) {
            ++n;
        }
    }
    return n;
}

std::size_t SkeletonTree::record_index(double t) const {
    for (std::size_t i = 0; i < record_times.size(); ++i) {
        if (std::abs(record_times[i] - t) <= 1e-12) {
            return i;
        }
    }
    throw std::invalid_argument("SkeletonTree: t is not a record time");
}

namespace {

int sample_offspring(const SkeletonLaw& law, Rng& rng) {
    // Truncated pmf renormalized for sampling; the tail mass is reported on
    // the law itself.
    double total = 0.0;
    for (double p : law.pk) {
        total += p;
    }
    if (total <= 0.0) {
        throw std::runtime_error("simulate_skeleton: offspring pmf is empty at branch point");
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t j = 0; j < law.pk.size(); ++j) {
        acc += law.pk[j];
        if (u <= acc) {
            return static_cast<int>(j) + 2;
        }
    }
    return law.k_max();
}

}  // namespace

SkeletonTree simulate_skeleton(const MotionModel& motion_w, const SkeletonLawSpec& spec,
                               std::span<const double> init_positions,
                               const SkeletonParams& params, std::uint64_t seed,
                               std::uint64_t replica) {
    const int dim = motion_w.dim;
    if (init_positions.size() % static_cast<std::size_t>(dim) != 0) {
        throw std::invalid_argument("simulate_skeleton: initial positions have wrong stride");
    }
    if (spec.spatial && !(spec.q_bar > 0.0)) {
        throw std::invalid_argument("simulate_skeleton: varying law needs a thinning bound q_bar");
    }
    SkeletonTree tree;
    tree.dim = dim;
    tree.horizon = params.horizon;
    tree.record_times = params.record_times;
    std::sort(tree.record_times.begin(), tree.record_times.end());
    if (!tree.record_times.empty() &&
        (tree.record_times.front() < 0.0 || tree.record_times.back() > params.horizon)) {
        throw std::invalid_argument("simulate_skeleton: record times must lie in [0, horizon]");
    }
    tree.snapshots.assign(tree.record_times.size(), {});

    const double kill_sup = motion_w.killed ? motion_w.kill_sup : 0.0;
    const bool const_kill = !motion_w.killed || motion_w.kill_rate.is_constant();
    const double gamma_const = motion_w.killed && motion_w.kill_rate.is_constant()
                                   ? motion_w.kill_rate.value()
                                   : 0.0;
    const bool thinning = spec.spatial || (motion_w.killed && !const_kill);
    const double thin_bound =
        (spec.spatial ? spec.q_bar : (spec.law.degenerate ? 0.0 : spec.law.q)) + kill_sup;

    auto store_position = [&](std::span<const double> x) {
        const std::int64_t offset = static_cast<std::int64_t>(tree.arena.size()) / dim;
        tree.arena.insert(tree.arena.end(), x.begin(), x.end());
        return offset;
    };

    const std::size_t n_init = init_positions.size() / static_cast<std::size_t>(dim);
    std::vector<std::int32_t> work;
    for (std::size_t i = 0; i < n_init; ++i) {
        Particle root;
        root.birth = 0.0;
        root.birth_pos = store_position(init_positions.subspan(i * dim, dim));
        tree.particles.push_back(root);
        work.push_back(static_cast<std::int32_t>(i));
    }

    std::vector<double> x(static_cast<std::size_t>(dim));
    std::vector<double> x_next(static_cast<std::size_t>(dim));

    while (!work.empty()) {
        const std::int32_t u = work.back();
        work.pop_back();
        const std::uint32_t entity = static_cast<std::uint32_t>(u);
        Rng life = make_stream(seed, replica, stream_tag::kTreeLife, entity);
        Rng move = make_stream(seed, replica, stream_tag::kTreeMotion, entity);
        Rng marks = make_stream(seed, replica, stream_tag::kTreeMarks, entity);

        double t = tree.particles[static_cast<std::size_t>(u)].birth;
        {
            const auto pos = tree.position(tree.particles[static_cast<std::size_t>(u)].birth_pos);
            std::copy(pos.begin(), pos.end(), x.begin());
        }
        std::size_t rec = 0;
        while (rec < tree.record_times.size() && tree.record_times[rec] < t) {
            ++rec;
        }
        double next_mark = params.mark_rate > 0.0
                               ? t + marks.exponential(params.mark_rate)
                               : std::numeric_limits<double>::infinity();

        // Pre-drawn death clock on the constant-rate path.
        double death_time = std::numeric_limits<double>::infinity();
        bool death_is_kill = false;
        if (!thinning) {
            const double q = spec.law.degenerate ? 0.0 : spec.law.q;
            const double branch_t =
                q > 0.0 ? t + life.exponential(q) : std::numeric_limits<double>::infinity();
            const double kill_t = gamma_const > 0.0
                                      ? t + life.exponential(gamma_const)
                                      : std::numeric_limits<double>::infinity();
            death_time = std::min(branch_t, kill_t);
            death_is_kill = kill_t < branch_t;
        }
        double next_candidate = (thinning && thin_bound > 0.0)
                                    ? t + life.exponential(thin_bound)
                                    : std::numeric_limits<double>::infinity();

        enum class Event { Death, Candidate, Mark, Record, Horizon };
        bool walking = true;
        while (walking) {
            // Event priority at (measure-zero) ties: death first, so that a
            // record at the same instant counts the children, not the parent.
            double t_ev = death_time;
            Event ev = Event::Death;
            if (next_candidate <= t_ev) {
                t_ev = next_candidate;
                ev = Event::Candidate;
            }
            if (next_mark < t_ev) {
                t_ev = next_mark;
                ev = Event::Mark;
            }
            const double t_rec = rec < tree.record_times.size()
                                     ? tree.record_times[rec]
                                     : std::numeric_limits<double>::infinity();
            if (t_rec < t_ev) {
                t_ev = t_rec;
                ev = Event::Record;
            }
            if (params.horizon < t_ev) {
                t_ev = params.horizon;
                ev = Event::Horizon;
            }

            motion_w.step(x, t_ev - t, move, x_next);
            std::swap(x, x_next);
            t = t_ev;

            switch (ev) {
                case Event::Record:
                    tree.snapshots[rec].push_back({u, store_position(x)});
                    ++rec;
                    continue;
                case Event::Mark:
                    tree.marks.push_back({u, t, store_position(x)});
                    next_mark = t + marks.exponential(params.mark_rate);
                    continue;
                case Event::Horizon:
                    walking = false;   // survives the horizon, death stays open
                    continue;
                case Event::Candidate: {
                    const SkeletonLaw local = spec.spatial ? spec.at(x) : spec.law;
                    const double q = local.degenerate ? 0.0 : local.q;
                    const double gamma = motion_w.killed ? motion_w.kill_rate(x) : 0.0;
                    if (q + gamma > thin_bound * (1.0 + 1e-12)) {
                        throw std::runtime_error("simulate_skeleton: thinning bound violated");
                    }
                    const double uvar = life.uniform() * thin_bound;
                    if (uvar < q) {
                        death_is_kill = false;
                    } else if (uvar < q + gamma) {
                        death_is_kill = true;
                    } else {
                        next_candidate = t + life.exponential(thin_bound);
                        continue;
                    }
                    break;   // accepted: fall through to the death handling
                }
                case Event::Death:
                    break;
            }

            const std::int64_t death_pos = store_position(x);
            int k = 0;
            if (!death_is_kill) {
                const SkeletonLaw law_here = spec.spatial ? spec.at(x) : spec.law;
                k = sample_offspring(law_here, life);
            }
            {
                // Write through the index: pushing children may reallocate.
                Particle& self = tree.particles[static_cast<std::size_t>(u)];
                self.death = t;
                self.death_pos = death_pos;
                self.killed = death_is_kill;
                self.n_children = k;
            }
            if (tree.particles.size() + static_cast<std::size_t>(k) > params.particle_cap) {
                tree.truncated = true;
                return tree;
            }
            for (int child = 0; child < k; ++child) {
                Particle c;
                c.parent = u;
                c.child_slot = child + 1;
                c.birth = t;
                c.birth_pos = death_pos;
                tree.particles.push_back(c);
                work.push_back(static_cast<std::int32_t>(tree.particles.size() - 1));
            }
            walking = false;
        }
    }
    return tree;
}

std::vector<double> init_poisson(std::span<const WeightedAtom> mu, const Field& w, int dim,
                                 Rng& rng) {
    std::vector<double> weights;
    weights.reserve(mu.size());
    double total = 0.0;
    for (const WeightedAtom& a : mu) {
        if (a.mass < 0.0) {
            throw std::invalid_argument("init_poisson: masses must be nonnegative");
        }
        if (static_cast<int>(a.position.size()) != dim) {
            throw std::invalid_argument("init_poisson: atom dimension mismatch");
        }
        const double wx = w(a.position);
        if (wx < 0.0) {
            throw std::invalid_argument("init_poisson: w must be nonnegative");
        }
        weights.push_back(wx * a.mass);
        total += wx * a.mass;
    }
    std::vector<double> out;
    if (total <= 0.0) {
        return out;   // empty population is a valid draw
    }
    const std::uint64_t count = rng.poisson(total);
    out.reserve(count * static_cast<std::size_t>(dim));
    for (std::uint64_t i = 0; i < count; ++i) {
        double u = rng.uniform() * total;
        std::size_t pick = 0;
        for (; pick + 1 < weights.size(); ++pick) {
            if (u <= weights[pick]) {
                break;
            }
            u -= weights[pick];
        }
        const WeightedAtom& a = mu[pick];
        out.insert(out.end(), a.position.begin(), a.position.end());
    }
    return out;
}

double population_integral(const SkeletonTree& tree, double t,
                           const std::function<double(std::span<const double>)>& f) {
    const std::size_t ri = tree.record_index(t);
    double acc = 0.0;
    for (const SnapshotEntry& e : tree.snapshots[ri]) {
        acc += f(tree.position(e.pos));
    }
    return acc;
}

double martingale_W(const SkeletonTree& tree, double t, const SpectralData& spectral) {
    const std::size_t ri = tree.record_index(t);
    double acc = 0.0;
    for (const SnapshotEntry& e : tree.snapshots[ri]) {
        acc += spectral.h(tree.position(e.pos));
    }
    return std::exp(spectral.lambda1 * t) * acc / spectral.w;
}

LlnStatistic lln_statistic(const SkeletonTree& tree, const TestFunction& phi, double t,
                           const SpectralData& spectral) {
    const std::size_t ri = tree.record_index(t);
    double num = 0.0;
    double den = 0.0;
    for (const SnapshotEntry& e : tree.snapshots[ri]) {
        const auto x = tree.position(e.pos);
        const double hw = spectral.h(x) / spectral.w;
        num += phi(x) * hw;
        den += hw;
    }
    if (den <= 0.0) {
        return {0.0, false};
    }
    return {num / den, true};
}

ManyToOneResult many_to_one_estimate(std::span<const SkeletonTree> trees,
                                     const TestFunction& f, double t,
                                     const MotionModel& base_motion, double beta, double w,
                                     std::span<const double> x0) {
    (void)w;   // constant w cancels in (1/w) P^beta_t(w f)
    if (trees.empty()) {
        throw std::invalid_argument("many_to_one_estimate: no trees");
    }
    std::vector<double> vals;
    vals.reserve(trees.size());
    for (const SkeletonTree& tree : trees) {
        vals.push_back(population_integral(tree, t, [&f](std::span<const double> x) {
            return f(x);
        }));
    }
    const Summary s = summarize(vals);
    ManyToOneResult r;
    r.mc_mean = s.mean;
    r.se = s.se;
    r.analytic = pbeta_expectation(base_motion, beta, f, x0, t);
    r.z = z_score(s.mean, s.se, r.analytic);
    return r;
}

}  // namespace superbranch
