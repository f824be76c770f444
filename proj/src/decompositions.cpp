#include "superbranch/decompositions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace superbranch {

namespace {

BranchingMechanism quadratic_part(const BranchingMechanism& mech) {
    if (mech.jumps().is_zero()) {
        return mech;
    }
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("decompositions: jump parts require a spatially constant "
                                    "mechanism");
    }
    return BranchingMechanism::constant(mech.beta_const(), mech.alpha_const());
}

std::vector<double> local_records(std::span<const double> records, double s, double horizon) {
    std::vector<double> out;
    for (double r : records) {
        if (r >= s && r <= horizon) {
            out.push_back(r - s);
        }
    }
    return out;
}

std::size_t first_record_at_or_after(std::span<const double> records, double s) {
    std::size_t i = 0;
    while (i < records.size() && records[i] < s) {
        ++i;
    }
    return i;
}

}  // namespace

EnsemblePath sample_excursion_approx(std::span<const double> start_x,
                                     const BranchingMechanism& mech, const MotionModel& motion,
                                     double epsilon, double horizon,
                                     std::span<const double> record_times, std::uint64_t seed,
                                     std::uint64_t replica) {
    SuperParams params;
    params.epsilon = epsilon;
    params.horizon = horizon;
    params.record_times.assign(record_times.begin(), record_times.end());
    std::vector<double> init(start_x.begin(), start_x.end());
    return simulate_superprocess(quadratic_part(mech), motion, init, params, seed, replica);
}

SpineRealization spine_sample(const BranchingMechanism& mech, const MotionModel& motion,
                              const SpectralData& spectral, std::span<const WeightedAtom> mu,
                              std::span<const TestFunction> fs, const SpineOptions& opts,
                              std::uint64_t seed, std::uint64_t replica) {
    const int dim = motion.dim;
    const double eps = opts.epsilon;
    if (!(eps > 0.0)) {
        throw std::invalid_argument("spine_sample: epsilon must be positive");
    }
    if (!mech.spatially_constant()) {
        // The conditional-mean predictor evaluates P^beta in closed form,
        // which needs constant coefficients.
        throw std::invalid_argument("spine_sample: spatially constant mechanism required");
    }
    std::vector<double> records = opts.record_times;
    std::sort(records.begin(), records.end());
    if (!records.empty() && (records.front() < 0.0 || records.back() > opts.horizon)) {
        throw std::invalid_argument("spine_sample: record times must lie in [0, horizon]");
    }
    const BranchingMechanism quad = quadratic_part(mech);
    const MotionModel motion_h = h_transform(motion, mech, spectral);

    SpineRealization out;
    out.record_times = records;
    out.gamma.assign(records.size(), std::vector<double>(fs.size(), 0.0));
    out.predictor.assign(records.size(), std::vector<double>(fs.size(), 0.0));
    out.w_mart.assign(records.size(), 0.0);

    Rng events = make_stream(seed, replica, stream_tag::kSpineEvents);
    Rng move = make_stream(seed, replica, stream_tag::kSpineMotion);

    // Spine start: h-size-biased pick among the atoms of mu.
    std::vector<double> x(static_cast<std::size_t>(dim));
    {
        double total = 0.0;
        std::vector<double> weights;
        for (const WeightedAtom& a : mu) {
            const double wgt = spectral.h(a.position) * a.mass;
            weights.push_back(wgt);
            total += wgt;
        }
        if (!(total > 0.0)) {
            throw std::invalid_argument("spine_sample: <h, mu> must be positive");
        }
        double u = events.uniform() * total;
        std::size_t pick = 0;
        for (; pick + 1 < weights.size(); ++pick) {
            if (u <= weights[pick]) {
                break;
            }
            u -= weights[pick];
        }
        std::copy(mu[pick].position.begin(), mu[pick].position.end(), x.begin());
    }

    auto add_ensemble = [&](const EnsemblePath& path, double s) {
        const std::size_t base = first_record_at_or_after(records, s);
        for (std::size_t k = 0; k < path.atoms.size(); ++k) {
            const std::size_t global = base + k;
            for (std::size_t fi = 0; fi < fs.size(); ++fi) {
                out.gamma[global][fi] +=
                    ensemble_integral(path, k, [&](std::span<const double> p) { return fs[fi](p); });
            }
            out.w_mart[global] +=
                std::exp(spectral.lambda1 * records[global]) *
                ensemble_integral(path, k, [&](std::span<const double> p) { return spectral.h(p); });
        }
        if (path.truncated) {
            out.truncated = true;
        }
    };

    // Independent copy of X under P_mu (rounded onto the epsilon grid).
    {
        const std::vector<double> init = seed_atoms(mu, eps, dim);
        SuperParams params;
        params.epsilon = eps;
        params.horizon = opts.horizon;
        params.record_times = records;
        params.atom_cap = opts.atom_cap;
        const EnsemblePath own = simulate_superprocess(quad, motion, init, params,
                                                       derive_seed(seed, replica, 1), 0);
        add_ensemble(own, 0.0);
        const std::size_t n0 = init.size() / static_cast<std::size_t>(dim);
        for (std::size_t ri = 0; ri < records.size(); ++ri) {
            for (std::size_t fi = 0; fi < fs.size(); ++fi) {
                for (std::size_t a = 0; a < n0; ++a) {
                    const std::span<const double> pt(init.data() + a * dim,
                                                     static_cast<std::size_t>(dim));
                    out.predictor[ri][fi] +=
                        eps * pbeta_expectation(motion, mech.beta(pt), fs[fi], pt, records[ri]);
                }
            }
        }
    }

    // Walk the spine, issuing continuous immigration at rate 2 alpha(x)/eps
    // and discontinuous immigration with kernel y pi(x,dy). Candidate events
    // arrive at the bounding rate; state-dependent rates thin inside fixed
    // regions of the candidate mark.
    const double dn_bound = 2.0 * mech.alpha_sup() / eps;
    const std::vector<JumpAtom> dm_kernel = [&] {
        std::vector<JumpAtom> kernel;
        for (const JumpAtom& a : mech.jumps().atoms()) {
            kernel.push_back({a.location, a.location * a.mass});
        }
        return kernel;
    }();
    // quadratic_part() already rejected spatial mechanisms with jumps, so the
    // discontinuous kernel here is position independent.
    double dm_bound = 0.0;
    for (const JumpAtom& a : dm_kernel) {
        dm_bound += a.mass;
    }

    const double total_bound = dn_bound + dm_bound;
    std::vector<double> x2(static_cast<std::size_t>(dim));
    double t = 0.0;
    std::uint32_t imm_index = 0;
    while (total_bound > 0.0) {
        const double t_ev = t + events.exponential(total_bound);
        if (t_ev >= opts.horizon) {
            break;
        }
        motion_h.step(x, t_ev - t, move, x2);
        std::swap(x, x2);
        t = t_ev;
        out.spine_times.push_back(t);
        out.spine_positions.insert(out.spine_positions.end(), x.begin(), x.end());
        const double u = events.uniform() * total_bound;
        const double dn_rate = 2.0 * mech.alpha(x) / eps;
        if (u < dn_rate) {
            // One epsilon seed of the excursion measure, original mechanism.
            out.dn_times.push_back(t);
            const std::vector<double> lrec = local_records(records, t, opts.horizon);
            SuperParams params;
            params.epsilon = eps;
            params.horizon = opts.horizon - t;
            params.record_times = lrec;
            params.atom_cap = opts.atom_cap;
            const EnsemblePath imm = simulate_superprocess(
                quad, motion, x, params, derive_seed(seed, replica, 2, imm_index++), 0);
            add_ensemble(imm, t);
            const std::size_t base = first_record_at_or_after(records, t);
            for (std::size_t k = base; k < records.size(); ++k) {
                for (std::size_t fi = 0; fi < fs.size(); ++fi) {
                    out.predictor[k][fi] +=
                        eps * pbeta_expectation(motion, mech.beta(x), fs[fi], x, records[k] - t);
                }
            }
        } else if (u >= dn_bound && u < dn_bound + dm_bound) {
            // Pick the jump atom proportional to y pi({y}).
            double v = u - dn_bound;
            std::size_t pick = 0;
            for (; pick + 1 < dm_kernel.size(); ++pick) {
                if (v <= dm_kernel[pick].mass) {
                    break;
                }
                v -= dm_kernel[pick].mass;
            }
            const double mass = dm_kernel[pick].location;
            const auto n_atoms = static_cast<std::size_t>(std::llround(mass / eps));
            const double seeded = static_cast<double>(n_atoms) * eps;
            out.dm_times.push_back(t);
            out.dm_masses.push_back(seeded);
            if (n_atoms > 0) {
                std::vector<double> init;
                for (std::size_t a = 0; a < n_atoms; ++a) {
                    init.insert(init.end(), x.begin(), x.end());
                }
                const std::vector<double> lrec = local_records(records, t, opts.horizon);
                SuperParams params;
                params.epsilon = eps;
                params.horizon = opts.horizon - t;
                params.record_times = lrec;
                params.atom_cap = opts.atom_cap;
                const EnsemblePath imm = simulate_superprocess(
                    quad, motion, init, params, derive_seed(seed, replica, 3, imm_index++), 0);
                add_ensemble(imm, t);
                const std::size_t base = first_record_at_or_after(records, t);
                for (std::size_t k = base; k < records.size(); ++k) {
                    for (std::size_t fi = 0; fi < fs.size(); ++fi) {
                        out.predictor[k][fi] += seeded * pbeta_expectation(motion, mech.beta(x),
                                                                           fs[fi], x,
                                                                           records[k] - t);
                    }
                }
            }
        }
        // Thinning ghost otherwise (spatially varying alpha below its sup).
    }
    return out;
}

DressRealization dress_replica(const BranchingMechanism& mech, double w,
                               const MotionModel& motion, const SpectralData& spectral,
                               std::span<const WeightedAtom> mu, const DressOptions& opts,
                               std::uint64_t seed, std::uint64_t replica) {
    if (!mech.jumps().is_zero()) {
        throw std::invalid_argument("dress_replica: quadratic mechanisms only (pi = 0)");
    }
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("dress_replica: spatially constant mechanism required");
    }
    const int dim = motion.dim;
    const double eps = opts.epsilon;
    std::vector<double> records = opts.record_times;
    std::sort(records.begin(), records.end());

    DressRealization out;
    out.record_times = records;
    const std::size_t nr = records.size();
    const std::size_t nf = opts.fs.size();
    const std::size_t nb = opts.bin_edges.empty() ? 0 : opts.bin_edges.size() - 1;
    out.z_count.assign(nr, 0.0);
    out.w_skeleton.assign(nr, 0.0);
    out.xhat_mass.assign(nr, 0.0);
    out.xstar_mass.assign(nr, 0.0);
    out.w_hat.assign(nr, 0.0);
    out.xhat_f.assign(nr, std::vector<double>(nf, 0.0));
    out.xstar_f.assign(nr, std::vector<double>(nf, 0.0));
    out.z_bin_count.assign(nr, std::vector<double>(nb, 0.0));
    out.xhat_bin_mass.assign(nr, std::vector<double>(nb, 0.0));

    const auto bin_of = [&](double v) -> std::ptrdiff_t {
        if (nb == 0) {
            return -1;
        }
        const auto it = std::upper_bound(opts.bin_edges.begin(), opts.bin_edges.end(), v);
        const std::ptrdiff_t idx = it - opts.bin_edges.begin() - 1;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(nb)) {
            return -1;
        }
        return idx;
    };

    // Skeleton with immigration marks at rate 2 alpha / eps along branches.
    const SkeletonLaw law = skeleton_law(mech, w, {});
    const MotionModel motion_w = w_transform(motion, mech, w);
    Rng init_rng = make_stream(seed, replica, stream_tag::kInit);
    const std::vector<double> init_z = init_poisson(mu, Field(w), dim, init_rng);
    SkeletonParams sparams;
    sparams.horizon = opts.horizon;
    sparams.record_times = records;
    sparams.particle_cap = opts.particle_cap;
    sparams.mark_rate = 2.0 * mech.alpha_const() / eps;
    const SkeletonTree tree = simulate_skeleton(motion_w, SkeletonLawSpec::constant(law), init_z,
                                                sparams, seed, replica);
    if (tree.truncated) {
        out.truncated = true;
    }
    for (std::size_t ri = 0; ri < nr; ++ri) {
        for (const SnapshotEntry& e : tree.snapshots[ri]) {
            const auto p = tree.position(e.pos);
            out.z_count[ri] += 1.0;
            out.w_skeleton[ri] += spectral.h(p) / w;
            const std::ptrdiff_t b = bin_of(p[0]);
            if (b >= 0) {
                out.z_bin_count[ri][static_cast<std::size_t>(b)] += 1.0;
            }
        }
        out.w_skeleton[ri] *= std::exp(spectral.lambda1 * records[ri]);
    }

    const auto accumulate_field = [&](const EnsemblePath& path, double s, bool star_too) {
        const std::size_t base = first_record_at_or_after(records, s);
        for (std::size_t k = 0; k < path.atoms.size(); ++k) {
            const std::size_t ri = base + k;
            const std::vector<double>& pts = path.atoms[k];
            const std::size_t n = pts.size() / static_cast<std::size_t>(dim);
            out.xhat_mass[ri] += eps * static_cast<double>(n);
            if (star_too) {
                out.xstar_mass[ri] += eps * static_cast<double>(n);
            }
            for (std::size_t a = 0; a < n; ++a) {
                const std::span<const double> p(pts.data() + a * dim,
                                                static_cast<std::size_t>(dim));
                out.w_hat[ri] += eps * spectral.h(p);
                for (std::size_t fi = 0; fi < nf; ++fi) {
                    const double v = eps * opts.fs[fi](p);
                    out.xhat_f[ri][fi] += v;
                    if (star_too) {
                        out.xstar_f[ri][fi] += v;
                    }
                }
                const std::ptrdiff_t b = bin_of(p[0]);
                if (b >= 0) {
                    out.xhat_bin_mass[ri][static_cast<std::size_t>(b)] += eps;
                }
            }
        }
        if (path.truncated) {
            out.truncated = true;
        }
    };

    // Initial-mass process X* under the tilted mechanism.
    {
        const std::vector<double> init = seed_atoms(mu, eps, dim);
        SuperParams params;
        params.epsilon = eps;
        params.horizon = opts.horizon;
        params.record_times = records;
        params.atom_cap = opts.atom_cap;
        const EnsemblePath star = simulate_tilted(mech, w, motion, init, params,
                                                  derive_seed(seed, replica, 11), 0);
        accumulate_field(star, 0.0, /*star_too=*/true);
    }

    // Continuous immigration: one tilted epsilon seed per mark.
    const BranchingMechanism tilted = mech.tilt(w);
    std::uint32_t imm = 0;
    for (const MarkEvent& mark : tree.marks) {
        if (mark.time >= opts.horizon) {
            continue;
        }
        SuperParams params;
        params.epsilon = eps;
        params.horizon = opts.horizon - mark.time;
        params.record_times = local_records(records, mark.time, opts.horizon);
        params.atom_cap = opts.atom_cap;
        const EnsemblePath path =
            simulate_superprocess(tilted, motion, tree.position(mark.pos), params,
                                  derive_seed(seed, replica, 12, imm++), 0);
        accumulate_field(path, mark.time, /*star_too=*/false);
    }
    out.immigrants = imm;
    for (std::size_t ri = 0; ri < nr; ++ri) {
        out.w_hat[ri] *= std::exp(spectral.lambda1 * records[ri]);
    }
    return out;
}

ThinningReport thinning_test(const std::vector<std::vector<double>>& counts_by_bin,
                             const std::vector<std::vector<double>>& wmass_by_bin,
                             double level, int resamples, Rng& rng) {
    if (counts_by_bin.size() != wmass_by_bin.size() || counts_by_bin.empty()) {
        throw std::invalid_argument("thinning_test: mismatched bin series");
    }
    const std::size_t n = counts_by_bin.front().size();
    for (const auto& series : counts_by_bin) {
        if (series.size() != n) {
            throw std::invalid_argument("thinning_test: ragged replica series");
        }
    }
    if (n < 8) {
        throw std::invalid_argument("thinning_test: insufficient paired replicas");
    }
    const std::size_t nb = counts_by_bin.size();
    const auto statistic = [&](std::span<const std::size_t> idx) {
        double var_sum = 0.0;
        double mean_sum = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            double mu = 0.0;
            double mw = 0.0;
            for (std::size_t i : idx) {
                mu += counts_by_bin[b][i] - wmass_by_bin[b][i];
                mw += wmass_by_bin[b][i];
            }
            mu /= static_cast<double>(idx.size());
            mw /= static_cast<double>(idx.size());
            double ss = 0.0;
            for (std::size_t i : idx) {
                const double d = counts_by_bin[b][i] - wmass_by_bin[b][i] - mu;
                ss += d * d;
            }
            var_sum += ss / (static_cast<double>(idx.size()) - 1.0);
            mean_sum += mw;
        }
        return mean_sum > 0.0 ? var_sum / mean_sum : 0.0;
    };

    ThinningReport rep;
    rep.ci = bootstrap_ci(n, statistic, level, resamples, rng);
    rep.dispersion = rep.ci.estimate;
    rep.ci_contains_one = rep.ci.lo <= 1.0 && 1.0 <= rep.ci.hi;

    // Mean matching on the pooled series.
    std::vector<double> diffs(n, 0.0);
    double mc = 0.0;
    double mw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < nb; ++b) {
            diffs[i] += counts_by_bin[b][i] - wmass_by_bin[b][i];
            mc += counts_by_bin[b][i];
            mw += wmass_by_bin[b][i];
        }
    }
    const Summary ds = summarize(diffs);
    rep.mean_count = mc / static_cast<double>(n);
    rep.mean_wmass = mw / static_cast<double>(n);
    rep.mean_match_z = ds.se > 0.0 ? ds.mean / ds.se : 0.0;
    return rep;
}

}  // namespace superbranch
