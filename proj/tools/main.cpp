#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "superbranch/cb.hpp"
#include "superbranch/config.hpp"
#include "superbranch/csv.hpp"
#include "superbranch/decompositions.hpp"
#include "superbranch/quadrature.hpp"
#include "superbranch/runner.hpp"
#include "superbranch/verify.hpp"

namespace sb = superbranch;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int replicas = 0;
    int workers = 1;
};

sb::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
    sb::ExperimentConfig cfg = opts.config_path.empty()
                                   ? sb::parse_config("{}")
                                   : sb::load_config(opts.config_path);
    if (opts.seed_set) {
        cfg.seed = opts.seed;
    }
    if (opts.replicas > 0) {
        cfg.simulation.replicas = opts.replicas;
    }
    return cfg;
}

void save_tables(const sb::ExperimentOutput& out, const std::string& out_dir,
                 const std::string& stem) {
    // Wall-clock never enters the CSVs: outputs stay byte-identical per seed.
    if (out.truncation_events > 0) {
        std::fprintf(stderr,
                     "warning: %zu replicas hit the population cap (results truncated)\n",
                     out.truncation_events);
    }
    if (out_dir.empty()) {
        std::fputs(out.table.aggregate_csv().c_str(), stdout);
        return;
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream per(out_dir + "/" + stem + "_replicas.csv", std::ios::binary);
    per << out.table.per_replica_csv();
    std::ofstream agg(out_dir + "/" + stem + "_aggregate.csv", std::ios::binary);
    agg << out.table.aggregate_csv();
    std::printf("wrote %s/%s_{replicas,aggregate}.csv (%zu replicas, %.1f ms)\n",
                out_dir.c_str(), stem.c_str(), out.table.values.size(), out.elapsed_ms);
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_config) {
    auto* copt = cmd->add_option("--config", opts.config_path, "experiment config file (JSON)");
    if (needs_config) {
        copt->required();
    }
    cmd->add_option("--seed", opts.seed, "master seed override")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--replicas", opts.replicas, "replica count override");
    cmd->add_option("--workers", opts.workers, "worker threads");
    cmd->add_option("--out", opts.out_dir, "output directory (stdout when omitted)");
}

int cmd_mechanism_inspect(const CommonOpts& opts) {
    const sb::ExperimentConfig cfg = load_with_overrides(opts);
    const sb::BranchingMechanism& mech = cfg.mechanism;

    sb::CsvWriter psi_table({"lambda", "psi", "psi0"});
    for (double lambda : {0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        psi_table.row({lambda, mech.psi(lambda), mech.psi0(lambda)});
    }
    std::fputs(psi_table.text().c_str(), stdout);

    const sb::ZpsiResult z = sb::root_zpsi(mech);
    if (z.infinite) {
        std::printf("z_psi,inf\n");
    } else {
        std::printf("z_psi,%s\n", sb::format_number(z.z).c_str());
    }
    const sb::GreyResult grey = sb::grey_check(mech);
    std::printf("grey,%d,confident,%d\n", grey.holds ? 1 : 0, grey.confident ? 1 : 0);

    if (!z.infinite && z.z > 0.0) {
        const sb::SkeletonLaw law = sb::skeleton_law(mech, z.z, {});
        std::printf("skeleton_q,%s\n", sb::format_number(law.q).c_str());
        sb::CsvWriter pk({"k", "p_k"});
        for (std::size_t j = 0; j < law.pk.size(); ++j) {
            if (law.pk[j] > 0.0) {
                pk.row({static_cast<double>(j + 2), law.pk[j]});
            }
        }
        std::fputs(pk.text().c_str(), stdout);
        std::printf("pmf_tail_mass,%s\n", sb::format_number(law.tail_mass).c_str());
    }
    return 0;
}

int cmd_cb_solve(const CommonOpts& opts, const std::vector<double>& lambdas,
                 const std::vector<double>& times) {
    const sb::ExperimentConfig cfg = load_with_overrides(opts);
    sb::CsvWriter csv({"lambda", "t", "v"});
    for (double lambda : lambdas) {
        const sb::CumulantSolution sol = sb::cumulant_path(cfg.mechanism, lambda, times);
        for (std::size_t i = 0; i < sol.t.size(); ++i) {
            csv.row({lambda, sol.t[i], sol.v[i]});
        }
    }
    std::fputs(csv.text().c_str(), stdout);
    return 0;
}

int cmd_cb_simulate(const CommonOpts& opts, double y0, double horizon, double dt) {
    const sb::ExperimentConfig cfg = load_with_overrides(opts);
    const int n = cfg.simulation.replicas;
    std::vector<double> finals(static_cast<std::size_t>(n));
    std::vector<double> extinct(static_cast<std::size_t>(n));
    sb::parallel_replicas(static_cast<std::size_t>(n), opts.workers, [&](std::size_t r) {
        sb::Rng rng = sb::make_stream(cfg.seed, r, sb::stream_tag::kCbPath);
        const sb::CbPath path = sb::simulate_cb(cfg.mechanism, y0, horizon, dt, rng);
        finals[r] = path.y.back();
        extinct[r] = path.extinct ? 1.0 : 0.0;
    });
    const sb::Summary fy = sb::summarize(finals);
    const sb::Summary fe = sb::summarize(extinct);
    sb::CsvWriter csv({"T", "replicas", "mean_Y", "se_Y", "extinct_fraction", "extinct_se",
                       "analytic_mean", "analytic_extinct"});
    csv.row({horizon, static_cast<double>(n), fy.mean, fy.se, fe.mean,
             sb::binomial_se(fe.mean, static_cast<std::size_t>(n)),
             y0 * std::exp(cfg.mechanism.beta_const() * horizon),
             sb::extinction_by(cfg.mechanism, horizon, y0)});
    std::fputs(csv.text().c_str(), stdout);
    return 0;
}

int cmd_motion_check(const std::string& kind, double c, int d, const std::string& tests,
                     std::uint64_t seed) {
    const sb::MotionModel motion = kind == "outward_ou" ? sb::outward_ou(c, d)
                                                        : sb::inward_ou(c, d);
    int failures = 0;
    if (tests.find("ks") != std::string::npos) {
        const int n = 100'000;
        std::vector<double> samples(n);
        sb::Rng rng(seed, 1);
        const std::vector<double> x0(static_cast<std::size_t>(d), 0.0);
        std::vector<double> y(static_cast<std::size_t>(d));
        for (int i = 0; i < n; ++i) {
            motion.step(x0, 1.0, rng, y);
            samples[static_cast<std::size_t>(i)] = y[0];
        }
        const double sd = std::sqrt(motion.step_var(1.0));
        const sb::KsResult ks = sb::ks_test(samples, [sd](double v) {
            return sb::normal_cdf(v / sd);
        });
        const bool pass = ks.p_value >= 0.01;
        std::printf("ks,%s,p=%s,%s\n", sb::format_number(ks.d).c_str(),
                    sb::format_number(ks.p_value).c_str(), pass ? "pass" : "FAIL");
        failures += pass ? 0 : 1;
    }
    if (tests.find("chapman") != std::string::npos) {
        // Chapman-Kolmogorov on a coarse grid, d = 1 only.
        double worst = 0.0;
        for (double x : {-1.0, 0.0, 0.7}) {
            for (double yv : {-0.5, 0.3, 1.2}) {
                const double xa[1] = {x};
                const double ya[1] = {yv};
                const double direct = motion.transition_density(0.7, xa, ya);
                const double composed = sb::integrate(
                    [&](double z) {
                        const double za[1] = {z};
                        return motion.transition_density(0.3, xa, za) *
                               motion.transition_density(0.4, za, ya) * motion.m_density(za);
                    },
                    -12.0, 12.0, 96);
                worst = std::max(worst, std::abs(direct - composed) /
                                            std::max(std::abs(direct), 1e-12));
            }
        }
        const bool pass = worst < 1e-6;
        std::printf("chapman,max_rel_err=%s,%s\n", sb::format_number(worst).c_str(),
                    pass ? "pass" : "FAIL");
        failures += pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

int cmd_super_estimate_w(const CommonOpts& opts, const std::vector<double>& x,
                         const std::vector<double>& horizons) {
    const sb::ExperimentConfig cfg = load_with_overrides(opts);
    const std::vector<double> x0 =
        x.empty() ? std::vector<double>(static_cast<std::size_t>(cfg.motion.dim), 0.0) : x;
    const sb::WEstimate est =
        sb::estimate_w(cfg.mechanism, cfg.motion, x0, horizons, cfg.simulation.epsilon,
                       cfg.simulation.replicas, cfg.simulation.atom_cap, cfg.seed);
    sb::CsvWriter csv({"T", "extinct_fraction", "w_hat", "se", "lower_bound"});
    for (const sb::WEstimateRow& row : est.rows) {
        csv.row({row.horizon, row.extinct_fraction, row.w_hat, row.se,
                 row.lower_bound ? 1.0 : 0.0});
    }
    std::fputs(csv.text().c_str(), stdout);
    return 0;
}

int cmd_verify(const std::string& preset, std::uint64_t seed, int workers, double scale,
               const std::string& out_dir) {
    const sb::VerifyOutcome outcome = sb::run_verify(preset, seed, workers, scale, out_dir);
    for (const sb::CheckResult& c : outcome.checks) {
        std::printf("[%s] %s %s: %s\n", c.pass ? "PASS" : "FAIL", c.preset.c_str(),
                    c.name.c_str(), c.detail.c_str());
    }
    std::printf("%s: %zu checks, %s\n", preset.c_str(), outcome.checks.size(),
                outcome.all_pass() ? "all passed" : "FAILURES");
    return outcome.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"superbranch: skeleton and spine decompositions of supercritical "
                 "superprocesses, with statistical verification"};
    app.require_subcommand(1);

    CommonOpts opts;

    // mechanism inspect
    auto* mechanism = app.add_subcommand("mechanism", "branching mechanism analytics");
    auto* inspect = mechanism->add_subcommand("inspect", "print psi table, z_psi, Grey flag and "
                                                         "skeleton law");
    add_common(inspect, opts, /*needs_config=*/true);

    // cb solve | simulate
    auto* cb = app.add_subcommand("cb", "continuous-state branching analytics");
    auto* cb_solve = cb->add_subcommand("solve", "cumulant v_t(lambda) as CSV");
    std::vector<double> cb_lambdas{1.0};
    std::vector<double> cb_times{1.0};
    cb_solve->add_option("--lambda", cb_lambdas, "lambda values")->delimiter(',');
    cb_solve->add_option("--t", cb_times, "times (sorted)")->delimiter(',');
    add_common(cb_solve, opts, false);
    auto* cb_sim = cb->add_subcommand("simulate", "Euler paths of the total-mass diffusion");
    double cb_y0 = 1.0;
    double cb_T = 1.0;
    double cb_dt = 1e-3;
    cb_sim->add_option("--y0", cb_y0, "initial mass");
    cb_sim->add_option("--T", cb_T, "horizon");
    cb_sim->add_option("--dt", cb_dt, "Euler step");
    add_common(cb_sim, opts, false);

    // motion check
    auto* motion = app.add_subcommand("motion", "spatial motion checks");
    auto* mcheck = motion->add_subcommand("check", "sampler-vs-density and Chapman-Kolmogorov");
    std::string motion_kind = "inward_ou";
    double motion_c = 1.0;
    int motion_d = 1;
    std::string motion_tests = "ks,chapman";
    std::uint64_t motion_seed = 1;
    mcheck->add_option("--kind", motion_kind, "inward_ou or outward_ou");
    mcheck->add_option("--c", motion_c, "restoring rate");
    mcheck->add_option("--d", motion_d, "dimension");
    mcheck->add_option("--tests", motion_tests, "comma list: ks,chapman");
    mcheck->add_option("--seed", motion_seed, "seed");

    // skeleton run
    auto* skeleton = app.add_subcommand("skeleton", "skeleton branching process");
    auto* skel_run = skeleton->add_subcommand("run", "simulate replicas, emit CSVs");
    std::vector<double> record_override;
    skel_run->add_option("--record", record_override, "record times override")->delimiter(',');
    add_common(skel_run, opts, true);

    // super run | estimate-w
    auto* super = app.add_subcommand("super", "epsilon-mass superprocess approximation");
    auto* super_run = super->add_subcommand("run", "simulate replicas, emit CSVs");
    double super_eps = 0.0;
    super_run->add_option("--epsilon", super_eps, "atom mass override");
    add_common(super_run, opts, true);
    auto* super_w = super->add_subcommand("estimate-w", "extinction-based estimate of w(x)");
    std::vector<double> w_x;
    std::vector<double> w_T{5.0, 10.0};
    super_w->add_option("--x", w_x, "starting point (defaults to origin)")->delimiter(',');
    super_w->add_option("--T-list", w_T, "horizon list")->delimiter(',');
    add_common(super_w, opts, true);

    // spine check
    auto* spine = app.add_subcommand("spine", "spine decomposition");
    auto* spine_check = spine->add_subcommand("check", "per-realization conditional-mean data");
    add_common(spine_check, opts, true);

    // dress run | thinning-test
    auto* dress = app.add_subcommand("dress", "skeleton dressing");
    auto* dress_run = dress->add_subcommand("run", "dressed-field replicas, emit CSVs");
    add_common(dress_run, opts, true);
    auto* dress_thin = dress->add_subcommand("thinning-test", "Poisson thinning dispersion test");
    add_common(dress_thin, opts, true);

    // verify
    auto* verify = app.add_subcommand("verify", "statistical acceptance presets");
    std::string preset = "all";
    std::uint64_t verify_seed = 7;
    int verify_workers = 1;
    double verify_scale = 1.0;
    std::string verify_out;
    verify->add_option("--preset", preset, "one of: cb, skeleton-8.1, skeleton-8.2, "
                                           "super-moments, dressing, lln-8.1, all");
    verify->add_option("--seed", verify_seed, "master seed");
    verify->add_option("--workers", verify_workers, "worker threads");
    verify->add_option("--scale", verify_scale, "replica budget multiplier");
    verify->add_option("--out", verify_out, "output directory for aggregate CSVs");

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) {
            return cmd_mechanism_inspect(opts);
        }
        if (cb_solve->parsed()) {
            std::sort(cb_times.begin(), cb_times.end());
            return cmd_cb_solve(opts, cb_lambdas, cb_times);
        }
        if (cb_sim->parsed()) {
            return cmd_cb_simulate(opts, cb_y0, cb_T, cb_dt);
        }
        if (mcheck->parsed()) {
            return cmd_motion_check(motion_kind, motion_c, motion_d, motion_tests, motion_seed);
        }
        if (skel_run->parsed()) {
            sb::ExperimentConfig cfg = load_with_overrides(opts);
            if (!record_override.empty()) {
                cfg.simulation.record_times = record_override;
                std::sort(cfg.simulation.record_times.begin(),
                          cfg.simulation.record_times.end());
                cfg.simulation.horizon =
                    std::max(cfg.simulation.horizon, cfg.simulation.record_times.back());
            }
            save_tables(sb::run_skeleton_experiment(cfg, opts.workers), opts.out_dir, "skeleton");
            return 0;
        }
        if (super_run->parsed()) {
            sb::ExperimentConfig cfg = load_with_overrides(opts);
            if (super_eps > 0.0) {
                cfg.simulation.epsilon = super_eps;
            }
            save_tables(sb::run_super_experiment(cfg, opts.workers), opts.out_dir, "super");
            return 0;
        }
        if (super_w->parsed()) {
            return cmd_super_estimate_w(opts, w_x, w_T);
        }
        if (spine_check->parsed()) {
            save_tables(sb::run_spine_experiment(load_with_overrides(opts), opts.workers),
                        opts.out_dir, "spine");
            return 0;
        }
        if (dress_run->parsed()) {
            save_tables(sb::run_dress_experiment(load_with_overrides(opts), opts.workers),
                        opts.out_dir, "dress");
            return 0;
        }
        if (dress_thin->parsed()) {
            const sb::ExperimentConfig cfg = load_with_overrides(opts);
            if (cfg.tests.bin_edges.size() < 2) {
                throw sb::ConfigError("dress thinning-test: config.tests.bin_edges required");
            }
            const sb::ExperimentOutput run = sb::run_dress_experiment(cfg, opts.workers);
            const std::size_t nb = cfg.tests.bin_edges.size() - 1;
            const std::size_t base = 5 + cfg.tests.functions.size();
            const sb::SpectralData spectral = cfg.spectral();
            sb::CsvWriter csv({"t", "dispersion", "ci_lo", "ci_hi", "mean_match_z", "pass"});
            bool all_pass = true;
            for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
                std::vector<std::vector<double>> counts(nb);
                std::vector<std::vector<double>> wmass(nb);
                for (std::size_t b = 0; b < nb; ++b) {
                    counts[b] = run.table.column(ti, base + 2 * b);
                    wmass[b] = run.table.column(ti, base + 2 * b + 1);
                    for (double& v : wmass[b]) {
                        v *= spectral.w;
                    }
                }
                sb::Rng rng = sb::make_stream(cfg.seed, ti, sb::stream_tag::kBootstrap);
                const sb::ThinningReport rep = sb::thinning_test(counts, wmass, 0.99, 2'000, rng);
                const bool pass = rep.ci_contains_one && std::abs(rep.mean_match_z) <= 3.0;
                all_pass = all_pass && pass;
                csv.row({cfg.simulation.record_times[ti], rep.dispersion, rep.ci.lo, rep.ci.hi,
                         rep.mean_match_z, pass ? 1.0 : 0.0});
            }
            std::fputs(csv.text().c_str(), stdout);
            return all_pass ? 0 : 1;
        }
        if (verify->parsed()) {
            return cmd_verify(preset, verify_seed, verify_workers, verify_scale, verify_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
