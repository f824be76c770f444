#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "superbranch/motion.hpp"
#include "superbranch/quadrature.hpp"
#include "superbranch/stats.hpp"

using namespace superbranch;

namespace {

std::vector<double> one_step_samples(const MotionModel& motion, double x0, double dt, int n,
                                     std::uint64_t seed) {
    std::vector<double> out(static_cast<std::size_t>(n));
    Rng rng(seed, 1);
    const std::vector<double> start(static_cast<std::size_t>(motion.dim), x0);
    std::vector<double> y(static_cast<std::size_t>(motion.dim));
    for (int i = 0; i < n; ++i) {
        motion.step(start, dt, rng, y);
        out[static_cast<std::size_t>(i)] = y[0];
    }
    return out;
}

}  // namespace

TEST_CASE("inward OU construction guards") {
    CHECK_THROWS_AS(inward_ou(0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(inward_ou(-1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(outward_ou(1.0, 0), std::invalid_argument);
}

TEST_CASE("zero-time step is the identity") {
    const MotionModel m = inward_ou(0.7, 3);
    const std::vector<double> x{0.3, -1.0, 2.0};
    std::vector<double> y(3);
    Rng rng(1, 1);
    m.step(x, 0.0, rng, y);
    CHECK(y == x);
}

TEST_CASE("inward OU one-step variance matches the exact formula") {
    const MotionModel m = inward_ou(1.0, 1);
    const int n = 100'000;
    const std::vector<double> xs = one_step_samples(m, 0.0, 1.0, n, 5);
    const Summary s = summarize(xs);
    const double var_target = (1.0 - std::exp(-2.0)) / 2.0;
    CHECK(std::abs(s.mean) < 3.0 * s.se);
    CHECK(std::abs(s.var - var_target) < 3.0 * variance_se(xs));
}

TEST_CASE("long steps land in the stationary law") {
    const MotionModel m = inward_ou(0.5, 1);
    const int n = 50'000;
    const std::vector<double> xs = one_step_samples(m, 4.0, 60.0, n, 6);
    const double sd = std::sqrt(1.0 / (2.0 * 0.5));
    const KsResult ks = ks_test(xs, [sd](double v) { return normal_cdf(v / sd); });
    CHECK(ks.p_value >= 0.01);
}

TEST_CASE("exact sampler law equals the Gaussian density (KS at 1%)") {
    std::uint64_t seed = 2;
    for (const MotionModel& m : {inward_ou(1.0, 1), outward_ou(1.0, 1)}) {
        const double x0 = 0.4;
        const double dt = 0.8;
        const std::vector<double> xs = one_step_samples(m, x0, dt, 100'000, seed++);
        const double mean = m.step_decay(dt) * x0;
        const double sd = std::sqrt(m.step_var(dt));
        const KsResult ks = ks_test(xs, [mean, sd](double v) {
            return normal_cdf((v - mean) / sd);
        });
        CHECK(ks.p_value >= 0.01);
    }
}

TEST_CASE("outward OU mean is e^{ct} x") {
    const MotionModel m = outward_ou(0.6, 1);
    const std::vector<double> xs = one_step_samples(m, 1.0, 0.9, 50'000, 8);
    const Summary s = summarize(xs);
    CHECK(std::abs(z_score(s.mean, s.se, std::exp(0.6 * 0.9))) < 3.0);
}

TEST_CASE("transition density integrates to one against m") {
    for (const MotionModel& m : {inward_ou(1.0, 1), outward_ou(0.8, 1)}) {
        for (double x0 : {-0.7, 0.0, 1.2}) {
            const double total = integrate(
                [&](double y) {
                    const double xa[1] = {x0};
                    const double ya[1] = {y};
                    return m.transition_density(0.9, xa, ya) * m.m_density(ya);
                },
                -14.0, 14.0, 96);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("transition density is m-symmetric") {
    for (const MotionModel& m : {inward_ou(1.0, 1), outward_ou(0.8, 1)}) {
        const double xa[1] = {0.5};
        const double ya[1] = {-1.1};
        CHECK(m.transition_density(0.6, xa, ya) ==
              doctest::Approx(m.transition_density(0.6, ya, xa)).epsilon(1e-10));
    }
}

TEST_CASE("chapman-kolmogorov on a coarse grid") {
    const MotionModel m = inward_ou(1.0, 1);
    for (double x0 : {-0.5, 0.8}) {
        for (double y0 : {0.0, 1.0}) {
            const double xa[1] = {x0};
            const double ya[1] = {y0};
            const double direct = m.transition_density(1.0, xa, ya);
            const double composed = integrate(
                [&](double z) {
                    const double za[1] = {z};
                    return m.transition_density(0.4, xa, za) *
                           m.transition_density(0.6, za, ya) * m.m_density(za);
                },
                -12.0, 12.0, 96);
            CHECK(composed == doctest::Approx(direct).epsilon(1e-8));
        }
    }
}

TEST_CASE("spectral data for the example models") {
    SUBCASE("inward OU with quadratic mechanism") {
        const auto mech = BranchingMechanism::constant(1.0, 1.0);
        const SpectralData s = spectral_for_example(ExampleId::InwardOuQuadratic, 1.0, 1, mech);
        CHECK(s.lambda1 == doctest::Approx(-1.0));
        CHECK(s.lambda_h == doctest::Approx(1.0));
        CHECK(s.w == doctest::Approx(1.0).epsilon(1e-10));
        const double x[1] = {0.3};
        CHECK(s.h(x) == doctest::Approx(1.0));
    }
    SUBCASE("outward OU") {
        const auto mech = BranchingMechanism::constant(2.0, 1.0);
        const SpectralData s = spectral_for_example(ExampleId::OutwardOuGaussian, 1.0, 1, mech);
        CHECK(s.lambda1 == doctest::Approx(-1.0));   // cd - beta = 1 - 2
        CHECK(s.w == doctest::Approx(2.0).epsilon(1e-9));
        // <h, h>_m = 1 by quadrature.
        const double norm = integrate(
            [&](double x) {
                const double xa[1] = {x};
                return s.h(xa) * s.h(xa) * s.m_density(xa);
            },
            -9.0, 9.0, 96);
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("not supercritical") {
        const auto mech = BranchingMechanism::constant(0.5, 1.0);
        CHECK_THROWS_AS(spectral_for_example(ExampleId::OutwardOuGaussian, 1.0, 1, mech),
                        std::invalid_argument);
    }
}

TEST_CASE("eigen identity e^{lambda1 t} P^beta_t h = h by Monte Carlo (outward OU)") {
    const auto mech = BranchingMechanism::constant(2.0, 1.0);
    const MotionModel m = outward_ou(1.0, 1);
    const SpectralData s = spectral_for_example(ExampleId::OutwardOuGaussian, 1.0, 1, mech);
    for (double t : {0.5, 1.0, 2.0}) {
        for (double x0 : {0.0, 0.8}) {
            const double x[1] = {x0};
            std::vector<double> vals(20'000);
            Rng rng(19, static_cast<std::uint64_t>(100.0 * t + x0 * 10.0));
            std::vector<double> y(1);
            const double growth = std::exp((s.lambda1 + 2.0) * t);
            for (double& v : vals) {
                m.step(x, t, rng, y);
                v = growth * s.h(y);
            }
            const Summary sum = summarize(vals);
            CHECK(std::abs(z_score(sum.mean, sum.se, s.h(x))) < 3.0);
        }
    }
}

TEST_CASE("h-transform maps the examples onto the inward OU") {
    const auto mech81 = BranchingMechanism::constant(1.0, 1.0);
    const MotionModel in = inward_ou(1.0, 1);
    const SpectralData s81 = spectral_for_example(ExampleId::InwardOuQuadratic, 1.0, 1, mech81);
    const MotionModel h81 = h_transform(in, mech81, s81);
    CHECK(h81.kind == MotionKind::InwardOu);
    CHECK(h81.c == doctest::Approx(1.0));

    const auto mech82 = BranchingMechanism::constant(2.0, 1.0);
    const MotionModel out = outward_ou(1.0, 1);
    const SpectralData s82 = spectral_for_example(ExampleId::OutwardOuGaussian, 1.0, 1, mech82);
    const MotionModel h82 = h_transform(out, mech82, s82);
    CHECK(h82.kind == MotionKind::InwardOu);
    CHECK(h82.c == doctest::Approx(1.0));
    CHECK(h82.dim == 1);
}

TEST_CASE("generic h-transform route: FK reweighting agrees with the analytic transform") {
    const auto mech = BranchingMechanism::constant(2.0, 1.0);
    const MotionModel out = outward_ou(1.0, 1);
    const SpectralData s = spectral_for_example(ExampleId::OutwardOuGaussian, 1.0, 1, mech);
    const MotionModel inward = h_transform(out, mech, s);
    const TestFunction f = TestFunction::gaussian(0.7, {0.4});
    const double x[1] = {0.5};
    const double t = 0.9;
    const ReweightedEstimate est = h_reweighted_expectation(out, s, 2.0, f, x, t, 40'000, 23);
    const double direct = ou_expectation(inward, f, x, t);
    CHECK(std::abs(z_score(est.mean, est.se, direct)) < 3.0);
    // Conservativity: P^h_t 1 = 1.
    const ReweightedEstimate one = h_reweighted_expectation(out, s, 2.0,
                                                            TestFunction::constant(1.0), x, t,
                                                            40'000, 24);
    CHECK(std::abs(z_score(one.mean, one.se, 1.0)) < 3.0);
}

TEST_CASE("w-transform") {
    SUBCASE("identity at w = z_psi for constant mechanisms") {
        const auto mech = BranchingMechanism::constant(1.0, 1.0);
        const MotionModel m = w_transform(inward_ou(1.0, 1), mech, 1.0);
        CHECK_FALSE(m.killed);
    }
    SUBCASE("positive constant kill rate") {
        // psi(1)/1 = alpha - beta = 0.5
        const auto mech = BranchingMechanism::constant(0.5, 1.0);
        const MotionModel m = w_transform(inward_ou(1.0, 1), mech, 1.0);
        CHECK(m.killed);
        CHECK(m.kill_rate.value() == doctest::Approx(0.5));
    }
    SUBCASE("negative kill rate rejected") {
        const auto mech = BranchingMechanism::constant(2.0, 1.0);
        CHECK_THROWS_AS(w_transform(inward_ou(1.0, 1), mech, 1.0), std::invalid_argument);
    }
    SUBCASE("sign-indefinite kill rate rejected") {
        const Field beta = Field::fn(
            [](std::span<const double> x) { return x[0] > 0.0 ? 2.0 : 0.0; }, 2.0);
        const auto mech = BranchingMechanism::spatial(beta, Field(1.0));
        CHECK_THROWS_AS(w_transform(inward_ou(1.0, 1), mech, 1.0), std::invalid_argument);
    }
    SUBCASE("w must be positive") {
        const auto mech = BranchingMechanism::constant(1.0, 1.0);
        CHECK_THROWS_AS(w_transform(inward_ou(1.0, 1), mech, 0.0), std::invalid_argument);
    }
}

TEST_CASE("p^h density closed form") {
    const double z[1] = {0.0};
    for (double t : {0.2, 1.0, 3.0}) {
        CHECK(a_tilde(1.0, 1, t, z) ==
              doctest::Approx(std::pow(1.0 - std::exp(-2.0 * t), -0.5)).epsilon(1e-12));
    }
    // Large-time limit is 1 for all x, y.
    const double x[1] = {0.7};
    const double y[1] = {-0.9};
    CHECK(ph_density(1.0, 1, 40.0, x, y) == doctest::Approx(1.0).epsilon(1e-10));
    // Symmetry.
    CHECK(ph_density(1.0, 1, 0.8, x, y) ==
          doctest::Approx(ph_density(1.0, 1, 0.8, y, x)).epsilon(1e-12));
    CHECK_THROWS_AS(ph_density(1.0, 1, 0.0, x, y), std::invalid_argument);

    // For the inward model p^h coincides with the transition density wrt m.
    const MotionModel m = inward_ou(1.0, 1);
    for (double t : {0.3, 1.2}) {
        CHECK(ph_density(1.0, 1, t, x, y) ==
              doctest::Approx(m.transition_density(t, x, y)).epsilon(1e-10));
    }
}

TEST_CASE("mixing bound shape: sup |p^h - 1| decays at rate lambda_h") {
    std::vector<double> ts;
    std::vector<double> logs;
    for (double t : {2.0, 3.0, 4.0, 5.0, 6.0}) {
        double sup = 0.0;
        for (double x0 = -1.5; x0 <= 1.5; x0 += 0.25) {
            for (double y0 = -1.5; y0 <= 1.5; y0 += 0.25) {
                const double x[1] = {x0};
                const double y[1] = {y0};
                sup = std::max(sup, std::abs(ph_density(1.0, 1, t, x, y) - 1.0));
            }
        }
        ts.push_back(t);
        logs.push_back(std::log(sup));
    }
    const LinearFit fit = linear_fit(ts, logs);
    CHECK(std::abs(-fit.slope - 1.0) <= 0.15);
}

TEST_CASE("P^h contraction toward the stationary average") {
    // |P^h_t g(x) - <g, h^2>| decreases in t for centered g (Example 8.1
    // geometry: P^h is the inward OU kernel itself).
    const MotionModel m = inward_ou(1.0, 1);
    const auto g = [](double y) { return y > 0.3 ? 1.0 : 0.0; };
    const double target = integrate(
        [&](double y) {
            const double ya[1] = {y};
            return g(y) * m.m_density(ya);
        },
        -9.0, 9.0, 64);
    const double x[1] = {1.1};
    double prev = std::numeric_limits<double>::infinity();
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        const double pt = integrate(
            [&](double y) {
                const double ya[1] = {y};
                return m.transition_density(t, x, ya) * g(y) * m.m_density(ya);
            },
            -9.0, 9.0, 96);
        const double gap = std::abs(pt - target);
        CHECK(gap <= prev + 1e-12);
        prev = gap;
    }
}
