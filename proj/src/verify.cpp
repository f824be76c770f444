#include "superbranch/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "superbranch/cb.hpp"
#include "superbranch/csv.hpp"
#include "superbranch/decompositions.hpp"
#include "superbranch/quadrature.hpp"
#include "superbranch/runner.hpp"

namespace superbranch {

namespace {

constexpr double kZGate = 3.0;
constexpr double kKsLevel = 0.01;
constexpr double kEulerDt = 1e-3;

// Absorption bias of the Euler scheme on the ultimate-extinction estimate,
// measured against the closed-form oracle at beta = alpha = 1 over dt in
// {4e-3, 2e-3, 1e-3} with 4e4 paths: |bias| stayed below 0.08 sqrt(dt).
// Pinned at 0.25 sqrt(dt), a 3x margin over the measurement.
constexpr double kEulerBiasPerSqrtDt = 0.25;

struct ExampleModel {
    BranchingMechanism mech;
    MotionModel motion;
    SpectralData spectral;
};

ExampleModel example81(double beta, double alpha, double c, int d) {
    ExampleModel m{BranchingMechanism::constant(beta, alpha), inward_ou(c, d), {}};
    m.spectral = spectral_for_example(ExampleId::InwardOuQuadratic, c, d, m.mech);
    return m;
}

ExampleModel example82(double beta, double alpha, double c, int d) {
    ExampleModel m{BranchingMechanism::constant(beta, alpha), outward_ou(c, d), {}};
    m.spectral = spectral_for_example(ExampleId::OutwardOuGaussian, c, d, m.mech);
    return m;
}

int scaled(double scale, int n) {
    return std::max(32, static_cast<int>(std::lround(n * scale)));
}

std::string fmt(double v) {
    return format_number(v);
}

CheckResult gate_abs(const std::string& preset, const std::string& name, double value,
                     double target, double tol, const std::string& extra = "") {
    CheckResult c;
    c.preset = preset;
    c.name = name;
    c.statistic = value - target;
    c.threshold = tol;
    c.pass = std::abs(value - target) <= tol;
    c.detail = "value=" + fmt(value) + " target=" + fmt(target) + " tol=" + fmt(tol) +
               (extra.empty() ? "" : " " + extra);
    return c;
}

CheckResult gate_z(const std::string& preset, const std::string& name, double mean, double se,
                   double target) {
    const double z = z_score(mean, se, target);
    CheckResult c;
    c.preset = preset;
    c.name = name;
    c.statistic = z;
    c.threshold = kZGate;
    c.pass = std::abs(z) <= kZGate;
    c.detail = "mean=" + fmt(mean) + " se=" + fmt(se) + " target=" + fmt(target);
    return c;
}

CheckResult gate_bool(const std::string& preset, const std::string& name, bool pass,
                      double statistic, double threshold, const std::string& detail) {
    CheckResult c;
    c.preset = preset;
    c.name = name;
    c.statistic = statistic;
    c.threshold = threshold;
    c.pass = pass;
    c.detail = detail;
    return c;
}

void maybe_save(const std::string& out_dir, const std::string& file, const std::string& text) {
    if (out_dir.empty()) {
        return;
    }
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/" + file;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("verify: cannot write " + path);
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

ExperimentConfig skeleton_config(const ExampleModel& model, ExampleId example,
                                 std::uint64_t seed, int replicas, double horizon,
                                 std::vector<double> records,
                                 std::vector<TestFunction> fns) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.mechanism = model.mech;
    cfg.motion = model.motion;
    cfg.spectral_example = example;
    WeightedAtom origin;
    origin.position.assign(static_cast<std::size_t>(model.motion.dim), 0.0);
    origin.mass = 1.0;
    cfg.initial_measure = {origin};
    cfg.simulation.horizon = horizon;
    cfg.simulation.record_times = std::move(records);
    cfg.simulation.replicas = replicas;
    cfg.tests.functions = std::move(fns);
    return cfg;
}

std::vector<double> finite_values(std::span<const double> xs) {
    std::vector<double> out;
    for (double v : xs) {
        if (std::isfinite(v)) {
            out.push_back(v);
        }
    }
    return out;
}

// ---------------------------------------------------------------- cb preset

VerifyOutcome preset_cb(std::uint64_t seed, int workers, double scale,
                        const std::string& out_dir) {
    VerifyOutcome out;
    const std::string preset = "cb";
    const BranchingMechanism mech = BranchingMechanism::constant(1.0, 1.0);

    // Cumulant ODE against the closed Riccati form for psi = -l + l^2.
    {
        double max_rel = 0.0;
        for (double lambda : {0.1, 1.0, 10.0, 100.0}) {
            std::vector<double> ts;
            for (int i = 0; i <= 20; ++i) {
                ts.push_back(0.25 * i);
            }
            const CumulantSolution sol = cumulant_path(mech, lambda, ts);
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const double t = ts[i];
                const double closed =
                    lambda / (lambda + (1.0 - lambda) * std::exp(-t));
                max_rel = std::max(max_rel, std::abs(sol.v[i] - closed) /
                                                std::max(std::abs(closed), 1e-300));
            }
        }
        out.checks.push_back(gate_bool(preset, "cumulant-riccati", max_rel < 1e-8, max_rel, 1e-8,
                                       "max_rel_err=" + fmt(max_rel)));
    }

    // Euler extinction fractions against e^{-vbar_T}.
    {
        const int replicas = scaled(scale, 10'000);
        std::vector<double> extinct_time(static_cast<std::size_t>(replicas),
                                         std::numeric_limits<double>::infinity());
        parallel_replicas(static_cast<std::size_t>(replicas), workers, [&](std::size_t r) {
            Rng rng = make_stream(seed, r, stream_tag::kCbPath);
            const CbPath path = simulate_cb(mech, 1.0, 10.0, kEulerDt, rng);
            if (path.extinct) {
                extinct_time[r] = path.extinct_time;
            }
        });
        CsvWriter table({"T", "extinct_fraction", "target", "binom_se"});
        for (double horizon : {1.0, 2.0, 10.0}) {
            std::size_t count = 0;
            for (double et : extinct_time) {
                if (et <= horizon) {
                    ++count;
                }
            }
            const double frac = static_cast<double>(count) / replicas;
            const double target = extinction_by(mech, horizon, 1.0);
            const double se = binomial_se(frac, static_cast<std::size_t>(replicas));
            table.row({horizon, frac, target, se});
            out.checks.push_back(gate_abs(preset, "cb-extinct-T" + fmt(horizon), frac, target,
                                          kZGate * se, "n=" + std::to_string(replicas)));
        }
        // Ultimate extinction: extinct-by-10 against e^{-z_psi} with the
        // documented Euler bias band.
        std::size_t count = 0;
        for (double et : extinct_time) {
            if (et <= 10.0) {
                ++count;
            }
        }
        const double frac = static_cast<double>(count) / replicas;
        const double target = extinction_prob(mech, 1.0);
        const double se = binomial_se(frac, static_cast<std::size_t>(replicas));
        const double band = kEulerBiasPerSqrtDt * std::sqrt(kEulerDt);
        out.checks.push_back(gate_abs(preset, "cb-extinct-ultimate", frac, target,
                                      kZGate * se + band, "band=" + fmt(band)));
        maybe_save(out_dir, "cb_extinction.csv", table.text());
    }

    // Laplace transform spot check of the Euler paths.
    {
        const int replicas = scaled(scale, 2'000);
        const LaplaceCheck lc = laplace_check(mech, 1.0, 2.0, 1.0, replicas, kEulerDt,
                                              derive_seed(seed, 7));
        out.checks.push_back(gate_z(preset, "cb-laplace", lc.empirical, lc.se, lc.analytic));
    }
    return out;
}

// ------------------------------------------------------- skeleton presets

void many_to_one_checks(VerifyOutcome& out, const std::string& preset,
                        const ExampleModel& model, std::uint64_t seed, int workers,
                        int replicas) {
    const SkeletonLaw law = skeleton_law(model.mech, model.spectral.w, {});
    const MotionModel motion_w = w_transform(model.motion, model.mech, model.spectral.w);
    const std::vector<double> records{1.0, 2.0};
    std::vector<TestFunction> fns{TestFunction::constant(1.0),
                                  TestFunction::gaussian(1.0, {0.0})};
    fns[0].set_name("one");
    fns[1].set_name("gauss");
    const std::vector<double> x0(static_cast<std::size_t>(model.motion.dim), 0.0);

    std::vector<std::vector<std::vector<double>>> samples(
        fns.size(), std::vector<std::vector<double>>(records.size()));
    for (auto& per_f : samples) {
        for (auto& per_t : per_f) {
            per_t.resize(static_cast<std::size_t>(replicas));
        }
    }
    parallel_replicas(static_cast<std::size_t>(replicas), workers, [&](std::size_t r) {
        SkeletonParams params;
        params.horizon = 2.0;
        params.record_times = records;
        const SkeletonTree tree = simulate_skeleton(motion_w, SkeletonLawSpec::constant(law), x0,
                                                    params, seed, r);
        for (std::size_t ti = 0; ti < records.size(); ++ti) {
            for (std::size_t fi = 0; fi < fns.size(); ++fi) {
                samples[fi][ti][r] = population_integral(tree, records[ti],
                                                         [&](std::span<const double> p) {
                                                             return fns[fi](p);
                                                         });
            }
        }
    });
    for (std::size_t fi = 0; fi < fns.size(); ++fi) {
        for (std::size_t ti = 0; ti < records.size(); ++ti) {
            const Summary s = summarize(samples[fi][ti]);
            const double analytic = pbeta_expectation(model.motion, model.mech.beta_const(),
                                                      fns[fi], x0, records[ti]);
            out.checks.push_back(gate_z(preset,
                                        "many-to-one-" + fns[fi].name() + "-t" + fmt(records[ti]),
                                        s.mean, s.se, analytic));
        }
    }
}

void martingale_checks(VerifyOutcome& out, const std::string& preset, const ExampleModel& model,
                       ExampleId example, std::uint64_t seed, int workers, int replicas,
                       const std::string& out_dir, const std::string& table_name) {
    ExperimentConfig cfg = skeleton_config(model, example, seed, replicas, 8.0,
                                           {1.0, 2.0, 4.0, 8.0}, {});
    const ExperimentOutput run = run_skeleton_experiment(cfg, workers);
    const std::vector<double> x0(static_cast<std::size_t>(model.motion.dim), 0.0);
    const double target = model.spectral.h(x0);   // <h, delta_0>
    for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
        const Summary s = summarize(run.table.column(ti, 1));
        out.checks.push_back(gate_z(preset,
                                    "martingale-flat-t" + fmt(cfg.simulation.record_times[ti]),
                                    s.mean, s.se, target));
    }
    maybe_save(out_dir, table_name, run.table.aggregate_csv());
}

void lln_checks(VerifyOutcome& out, const std::string& preset, const ExampleModel& model,
                ExampleId example, std::uint64_t seed, int workers, int replicas,
                double init_mass, double lln_target, const std::string& out_dir,
                const std::string& table_name) {
    TestFunction box = TestFunction::box({0.0}, 1.0);
    box.set_name("box1");
    ExperimentConfig cfg =
        skeleton_config(model, example, seed, replicas, 8.0, {2.0, 8.0}, {box});
    cfg.initial_measure[0].mass = init_mass;
    const ExperimentOutput run = run_skeleton_experiment(cfg, workers);

    CsvWriter table({"t", "n_surviving", "lln_mean", "lln_se", "lln_var"});
    std::vector<Summary> stats;
    for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
        const std::vector<double> vals = finite_values(run.table.column(ti, 2));
        const Summary s = summarize(vals);
        stats.push_back(s);
        table.row({cfg.simulation.record_times[ti], static_cast<double>(s.n), s.mean, s.se,
                   s.var});
    }
    out.checks.push_back(gate_z(preset, "lln-mean-t8", stats[1].mean, stats[1].se, lln_target));
    out.checks.push_back(gate_bool(preset, "lln-concentration", stats[1].var < stats[0].var,
                                   stats[1].var, stats[0].var,
                                   "var_t8=" + fmt(stats[1].var) + " var_t2=" + fmt(stats[0].var)));
    maybe_save(out_dir, table_name, table.text());
}

VerifyOutcome preset_skeleton81(std::uint64_t seed, int workers, double scale,
                                const std::string& out_dir) {
    VerifyOutcome out;
    const std::string preset = "skeleton-8.1";
    const ExampleModel model = example81(1.0, 1.0, 1.0, 1);
    many_to_one_checks(out, preset, model, derive_seed(seed, 81, 1), workers,
                       scaled(scale, 10'000));
    martingale_checks(out, preset, model, ExampleId::InwardOuQuadratic, derive_seed(seed, 81, 2),
                      workers, scaled(scale, 4'000), out_dir, "skeleton81_martingale.csv");

    // Mixing rate of the h-transformed kernel: sup-grid |p^h(t,x,y) - 1|
    // decays at the spectral gap.
    {
        std::vector<double> ts;
        std::vector<double> log_sup;
        for (double t : {2.0, 3.0, 4.0, 5.0, 6.0}) {
            double sup = 0.0;
            for (int i = 0; i <= 12; ++i) {
                for (int j = 0; j <= 12; ++j) {
                    const double x[1] = {-1.5 + 0.25 * i};
                    const double y[1] = {-1.5 + 0.25 * j};
                    sup = std::max(sup, std::abs(ph_density(1.0, 1, t, x, y) - 1.0));
                }
            }
            ts.push_back(t);
            log_sup.push_back(std::log(sup));
        }
        const LinearFit fit = linear_fit(ts, log_sup);
        const double rate = -fit.slope;
        const double rel = std::abs(rate - 1.0) / 1.0;
        out.checks.push_back(gate_bool(preset, "mixing-rate", rel <= 0.15, rate, 0.15,
                                       "fitted_rate=" + fmt(rate) + " lambda_h=1"));
    }
    return out;
}

VerifyOutcome preset_skeleton82(std::uint64_t seed, int workers, double scale,
                                const std::string& out_dir) {
    VerifyOutcome out;
    const std::string preset = "skeleton-8.2";
    // beta > c d keeps the model supercritical; the moderate gap keeps the
    // t = 8 population within the desk-scale budget.
    const ExampleModel model = example82(1.0, 1.0, 0.4, 1);
    many_to_one_checks(out, preset, model, derive_seed(seed, 82, 1), workers,
                       scaled(scale, 10'000));
    martingale_checks(out, preset, model, ExampleId::OutwardOuGaussian, derive_seed(seed, 82, 2),
                      workers, scaled(scale, 600), out_dir, "skeleton82_martingale.csv");
    // Quadrature target <phi, h^2> for the Example 8.2 suite. The run starts
    // from 20 unit-mass atoms at the origin: the weighted ratio is asymptotic
    // in t and pooling independent root families keeps its finite-t bias well
    // inside the gate at t = 8.
    const double c = model.spectral.c;
    const double target = integrate(
        [c](double x) { return std::sqrt(c / M_PI) * std::exp(-c * x * x); }, -1.0, 1.0, 64);
    lln_checks(out, preset, model, ExampleId::OutwardOuGaussian, derive_seed(seed, 82, 3),
               workers, scaled(scale, 400), 20.0, target, out_dir, "skeleton82_lln.csv");
    return out;
}

VerifyOutcome preset_lln81(std::uint64_t seed, int workers, double scale,
                           const std::string& out_dir) {
    VerifyOutcome out;
    const ExampleModel model = example81(1.0, 1.0, 1.0, 1);
    // Gaussian-CDF target: P(|N(0, 1/(2c))| <= 1).
    const double sd = std::sqrt(0.5);
    const double target = normal_cdf(1.0 / sd) - normal_cdf(-1.0 / sd);
    lln_checks(out, "lln-8.1", model, ExampleId::InwardOuQuadratic, derive_seed(seed, 51),
               workers, scaled(scale, 3'000), 1.0, target, out_dir, "lln81_concentration.csv");
    return out;
}

// ------------------------------------------------- super-moments preset

VerifyOutcome preset_super_moments(std::uint64_t seed, int workers, double scale,
                                   const std::string& out_dir) {
    VerifyOutcome out;
    const std::string preset = "super-moments";
    const ExampleModel model = example81(1.0, 1.0, 1.0, 1);
    const double eps = 0.05;

    ExperimentConfig cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                           derive_seed(seed, 61), scaled(scale, 1'000), 2.0,
                                           {0.5, 1.0, 2.0}, {});
    cfg.simulation.epsilon = eps;
    const ExperimentOutput run = run_super_experiment(cfg, workers);
    maybe_save(out_dir, "super_moments.csv", run.table.aggregate_csv());

    for (std::size_t ti = 0; ti < cfg.simulation.record_times.size(); ++ti) {
        const double t = cfg.simulation.record_times[ti];
        const std::vector<double> mass = run.table.column(ti, 1);
        const Summary s = summarize(mass);
        const double target = std::exp(t);
        out.checks.push_back(gate_abs(preset, "first-moment-t" + fmt(t), s.mean, target,
                                      kZGate * s.se + 2.0 * eps, "se=" + fmt(s.se)));
        if (t <= 1.0) {
            const double var_target = 2.0 * std::exp(2.0 * t) * (1.0 - std::exp(-t));
            const double vse = variance_se(mass);
            out.checks.push_back(gate_abs(preset, "variance-t" + fmt(t), s.var, var_target,
                                          kZGate * vse + 5.0 * eps, "var_se=" + fmt(vse)));
        }
    }

    // Laplace functional spot check: lambda = 1 at t = 1.
    {
        const std::vector<double> mass = run.table.column(1, 1);
        std::vector<double> lap(mass.size());
        for (std::size_t i = 0; i < mass.size(); ++i) {
            lap[i] = std::exp(-mass[i]);
        }
        const Summary s = summarize(lap);
        const double analytic = std::exp(-cumulant(model.mech, 1.0, 1.0));
        out.checks.push_back(gate_z(preset, "laplace-functional", s.mean, s.se, analytic));
    }

    // Criterion 7: w estimation brackets z_psi within CI + eps band.
    {
        const double horizons[2] = {5.0, 10.0};
        const double origin[1] = {0.0};
        const WEstimate est = estimate_w(model.mech, model.motion, origin, horizons, eps,
                                         scaled(scale, 800), 10'000'000, derive_seed(seed, 62));
        CsvWriter table({"T", "extinct_fraction", "w_hat", "se"});
        for (const WEstimateRow& row : est.rows) {
            table.row({row.horizon, row.extinct_fraction, row.w_hat, row.se});
            out.checks.push_back(gate_abs(preset, "estimate-w-T" + fmt(row.horizon), row.w_hat,
                                          1.0, kZGate * row.se + eps,
                                          "extinct_fraction=" + fmt(row.extinct_fraction)));
        }
        maybe_save(out_dir, "super_estimate_w.csv", table.text());
    }
    return out;
}

// ------------------------------------------------------ dressing preset

VerifyOutcome preset_dressing(std::uint64_t seed, int workers, double scale,
                              const std::string& out_dir) {
    VerifyOutcome out;
    const std::string preset = "dressing";
    const ExampleModel model = example81(1.0, 1.0, 1.0, 1);
    const double eps = 0.05;
    const double w = model.spectral.w;

    TestFunction box = TestFunction::box({0.0}, 1.0);
    box.set_name("box1");

    // Dressed ensemble.
    ExperimentConfig dress_cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                                 derive_seed(seed, 71), scaled(scale, 1'000),
                                                 2.0, {0.5, 1.0, 2.0}, {box});
    dress_cfg.simulation.epsilon = eps;
    dress_cfg.tests.bin_edges = {-3.0, -1.0, -0.35, 0.35, 1.0, 3.0};
    const ExperimentOutput dressed = run_dress_experiment(dress_cfg, workers);
    maybe_save(out_dir, "dressing_aggregate.csv", dressed.table.aggregate_csv());

    // Plain superfield ensemble with the same mechanism and measure.
    ExperimentConfig plain_cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                                 derive_seed(seed, 72), scaled(scale, 1'000),
                                                 2.0, {0.5, 1.0, 2.0}, {box});
    plain_cfg.simulation.epsilon = eps;
    const ExperimentOutput plain = run_super_experiment(plain_cfg, workers);

    // Criterion: equality in law of <1, X_1>.
    {
        const std::vector<double> dressed_mass = dressed.table.column(1, 2);
        const std::vector<double> plain_mass = plain.table.column(1, 1);
        const KsResult ks = ks_two_sample(dressed_mass, plain_mass);
        out.checks.push_back(gate_bool(preset, "dressing-ks-mass-t1", ks.p_value >= kKsLevel,
                                       ks.p_value, kKsLevel,
                                       "D=" + fmt(ks.d) + " p=" + fmt(ks.p_value)));
    }

    // Criterion: Poisson thinning dispersion at t in {1, 2}.
    {
        const std::size_t nb = dress_cfg.tests.bin_edges.size() - 1;
        const std::size_t base = 5 + dress_cfg.tests.functions.size();
        for (std::size_t ti : {std::size_t{1}, std::size_t{2}}) {
            std::vector<std::vector<double>> counts(nb);
            std::vector<std::vector<double>> wmass(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                counts[b] = dressed.table.column(ti, base + 2 * b);
                wmass[b] = dressed.table.column(ti, base + 2 * b + 1);
                for (double& v : wmass[b]) {
                    v *= w;
                }
            }
            Rng rng = make_stream(derive_seed(seed, 73), ti, stream_tag::kBootstrap);
            const ThinningReport rep = thinning_test(counts, wmass, 0.99, 2'000, rng);
            const double t = dress_cfg.simulation.record_times[ti];
            out.checks.push_back(gate_bool(
                preset, "thinning-dispersion-t" + fmt(t), rep.ci_contains_one, rep.dispersion,
                1.0, "ci=[" + fmt(rep.ci.lo) + "," + fmt(rep.ci.hi) + "]"));
            out.checks.push_back(gate_bool(preset, "thinning-mean-match-t" + fmt(t),
                                           std::abs(rep.mean_match_z) <= kZGate,
                                           rep.mean_match_z, kZGate,
                                           "count=" + fmt(rep.mean_count) +
                                               " wmass=" + fmt(rep.mean_wmass)));
        }
    }

    // Conditional-mean identity of the dressing along t -> t + s (slope and
    // intercept of realized future mass against the analytic predictor).
    {
        const double beta = model.mech.beta_const();
        const BranchingMechanism tilted = model.mech.tilt(w);
        const double beta_star = tilted.beta_const();
        const double s_gap = 1.0;
        const std::vector<double> m1 = dressed.table.column(1, 2);
        const std::vector<double> n1 = dressed.table.column(1, 0);
        const std::vector<double> m2 = dressed.table.column(2, 2);
        std::vector<double> predictor(m1.size());
        for (std::size_t i = 0; i < m1.size(); ++i) {
            predictor[i] = std::exp(beta_star * s_gap) * m1[i] +
                           (std::exp(beta * s_gap) - std::exp(beta_star * s_gap)) * n1[i] / w;
        }
        const LinearFit fit = linear_fit(predictor, m2);
        out.checks.push_back(gate_bool(preset, "sd1-regression-slope",
                                       std::abs(fit.slope - 1.0) <= kZGate * fit.slope_se,
                                       fit.slope, kZGate * fit.slope_se,
                                       "slope_se=" + fmt(fit.slope_se)));
        out.checks.push_back(gate_bool(preset, "sd1-regression-intercept",
                                       std::abs(fit.intercept) <= kZGate * fit.intercept_se,
                                       fit.intercept, kZGate * fit.intercept_se,
                                       "intercept_se=" + fmt(fit.intercept_se)));
    }

    // Spine conditional mean (sd2) and the size-bias identity.
    {
        TestFunction gauss = TestFunction::gaussian(1.0, {0.0});
        gauss.set_name("gauss");
        ExperimentConfig spine_cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                                     derive_seed(seed, 74),
                                                     scaled(scale, 400), 1.0, {1.0},
                                                     {TestFunction::constant(1.0), gauss});
        spine_cfg.tests.functions[0].set_name("one");
        spine_cfg.simulation.epsilon = eps;
        const ExperimentOutput spine = run_spine_experiment(spine_cfg, workers);
        for (std::size_t fi = 0; fi < spine_cfg.tests.functions.size(); ++fi) {
            const std::vector<double> gamma = spine.table.column(0, 2 * fi);
            const std::vector<double> pred = spine.table.column(0, 2 * fi + 1);
            std::vector<double> diff(gamma.size());
            for (std::size_t i = 0; i < gamma.size(); ++i) {
                diff[i] = gamma[i] - pred[i];
            }
            const Summary s = summarize(diff);
            out.checks.push_back(gate_z(preset,
                                        "sd2-conditional-mean-" +
                                            spine_cfg.tests.functions[fi].name(),
                                        s.mean, s.se, 0.0));
        }
        // Size bias: Q-mean of W equals P-mean of W^2 / <h, mu>.
        const std::vector<double> w_q = spine.table.column(0, 2 * spine_cfg.tests.functions.size());
        const Summary sq = summarize(w_q);
        const std::vector<double> plain_mass = plain.table.column(1, 1);
        std::vector<double> w2(plain_mass.size());
        for (std::size_t i = 0; i < plain_mass.size(); ++i) {
            const double wv = std::exp(model.spectral.lambda1 * 1.0) * plain_mass[i];
            w2[i] = wv * wv;
        }
        const Summary sp = summarize(w2);
        // The particle scheme biases E_P[W^2] upward by eps (1 - e^{-t}) per
        // unit mass (offspring-noise term of the second moment); the Q side
        // is exact in the mean. Allow that band on top of the Monte Carlo z.
        const double band = eps * (1.0 - std::exp(-1.0));
        const double se2 = std::sqrt(sq.se * sq.se + sp.se * sp.se);
        const double gap = sq.mean - sp.mean;
        out.checks.push_back(gate_bool(preset, "size-bias-identity",
                                       std::abs(gap) <= kZGate * se2 + band, gap,
                                       kZGate * se2 + band,
                                       "q_mean=" + fmt(sq.mean) + " p_mean=" + fmt(sp.mean)));
    }

    // Nondegeneracy of the dressed martingale limit at T = 8.
    {
        ExperimentConfig cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                               derive_seed(seed, 75), scaled(scale, 100), 8.0,
                                               {8.0}, {box});
        cfg.simulation.epsilon = 0.1;
        const ExperimentOutput run = run_dress_experiment(cfg, workers);
        const std::vector<double> wh = run.table.column(0, 4);
        std::size_t positive = 0;
        for (double v : wh) {
            if (v > 0.01) {
                ++positive;
            }
        }
        const double frac = static_cast<double>(positive) / wh.size();
        const double target = 1.0 - std::exp(-w);   // <w, mu> = w for unit delta mass
        const double se = binomial_se(frac, wh.size());
        out.checks.push_back(gate_abs(preset, "nondegeneracy-W", frac, target, kZGate * se,
                                      "n=" + std::to_string(wh.size())));
    }

    // LLN transfer on the dressed field: the normalized spatial average
    // concentrates as t grows.
    {
        ExperimentConfig cfg = skeleton_config(model, ExampleId::InwardOuQuadratic,
                                               derive_seed(seed, 76), scaled(scale, 300), 4.0,
                                               {2.0, 4.0}, {box});
        cfg.simulation.epsilon = eps;
        const ExperimentOutput run = run_dress_experiment(cfg, workers);
        const double sdv = std::sqrt(0.5);
        const double target = normal_cdf(1.0 / sdv) - normal_cdf(-1.0 / sdv);
        std::vector<Summary> stats;
        for (std::size_t ti = 0; ti < 2; ++ti) {
            const std::vector<double> mass = run.table.column(ti, 2);
            const std::vector<double> boxv = run.table.column(ti, 5);
            std::vector<double> ratios;
            for (std::size_t i = 0; i < mass.size(); ++i) {
                if (mass[i] > 0.0) {
                    ratios.push_back(boxv[i] / mass[i]);
                }
            }
            stats.push_back(summarize(ratios));
        }
        out.checks.push_back(gate_z(preset, "lln-transfer-mean-t4", stats[1].mean, stats[1].se,
                                    target));
        out.checks.push_back(gate_bool(preset, "lln-transfer-concentration",
                                       stats[1].var < stats[0].var, stats[1].var, stats[0].var,
                                       "var_t4=" + fmt(stats[1].var) +
                                           " var_t2=" + fmt(stats[0].var)));
    }
    return out;
}

}  // namespace

std::vector<std::string> verify_presets() {
    return {"cb", "skeleton-8.1", "skeleton-8.2", "super-moments", "dressing", "lln-8.1", "all"};
}

VerifyOutcome run_verify(const std::string& preset, std::uint64_t seed, int workers,
                         double scale, const std::string& out_dir) {
    VerifyOutcome out;
    const auto append = [&out](const VerifyOutcome& part) {
        out.checks.insert(out.checks.end(), part.checks.begin(), part.checks.end());
    };
    if (preset == "cb") {
        append(preset_cb(seed, workers, scale, out_dir));
    } else if (preset == "skeleton-8.1") {
        append(preset_skeleton81(seed, workers, scale, out_dir));
    } else if (preset == "skeleton-8.2") {
        append(preset_skeleton82(seed, workers, scale, out_dir));
    } else if (preset == "super-moments") {
        append(preset_super_moments(seed, workers, scale, out_dir));
    } else if (preset == "dressing") {
        append(preset_dressing(seed, workers, scale, out_dir));
    } else if (preset == "lln-8.1") {
        append(preset_lln81(seed, workers, scale, out_dir));
    } else if (preset == "all") {
        for (const std::string& p : verify_presets()) {
            if (p != "all") {
                append(run_verify(p, seed, workers, scale, out_dir));
            }
        }
    } else {
        throw std::invalid_argument("run_verify: unknown preset '" + preset + "'");
    }
    if (!out_dir.empty()) {
        CsvWriter csv({"preset", "check", "statistic", "threshold", "pass"});
        for (const CheckResult& c : out.checks) {
            csv.line({c.preset, c.name, format_number(c.statistic), format_number(c.threshold),
                      c.pass ? "1" : "0"});
        }
        maybe_save(out_dir, preset + "_checks.csv", csv.text());
    }
    return out;
}

}  // namespace superbranch
