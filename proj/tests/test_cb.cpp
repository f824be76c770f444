#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "superbranch/cb.hpp"
#include "superbranch/stats.hpp"

using namespace superbranch;

namespace {

// Closed Riccati solution of dv/dt = beta v - alpha v^2, v_0 = lambda.
double riccati(double beta, double alpha, double lambda, double t) {
    return beta * lambda / (alpha * lambda + (beta - alpha * lambda) * std::exp(-beta * t));
}

const BranchingMechanism kQuad = BranchingMechanism::constant(1.0, 1.0);

}  // namespace

TEST_CASE("riccati closed form solves the cumulant flow") {
    // dv/dt == beta v - alpha v^2 by central differences.
    const double beta = 1.4;
    const double alpha = 0.6;
    for (double lambda : {0.2, 1.0, 7.0}) {
        for (double t : {0.1, 0.8, 2.3}) {
            const double h = 1e-5;
            const double dv = (riccati(beta, alpha, lambda, t + h) -
                               riccati(beta, alpha, lambda, t - h)) / (2.0 * h);
            const double v = riccati(beta, alpha, lambda, t);
            CHECK(dv == doctest::Approx(beta * v - alpha * v * v).epsilon(1e-6));
        }
    }
}

TEST_CASE("cumulant fixed points and trivial values") {
    CHECK(cumulant(kQuad, 0.0, 3.0) == doctest::Approx(0.0));
    // lambda = z_psi = 1 is the fixed point.
    for (double t : {0.5, 1.0, 5.0}) {
        CHECK(cumulant(kQuad, 1.0, t) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("cumulant ODE against the closed Riccati form") {
    double max_rel = 0.0;
    for (double lambda : {0.1, 1.0, 10.0, 100.0}) {
        for (double t = 0.0; t <= 5.0; t += 0.25) {
            const double v = cumulant(kQuad, lambda, t);
            const double closed = riccati(1.0, 1.0, lambda, t);
            max_rel = std::max(max_rel, std::abs(v - closed) / closed);
        }
    }
    CHECK(max_rel < 1e-8);
}

TEST_CASE("cumulant semigroup property v_{t+s} = v_t(v_s)") {
    const BranchingMechanism mech =
        BranchingMechanism::constant(0.8, 0.5, JumpMeasure::from_atoms({{1.2, 0.6}}));
    for (double lambda : {0.3, 1.0, 4.0}) {
        for (double s : {0.4, 1.1}) {
            for (double t : {0.7, 1.6}) {
                const double direct = cumulant(mech, lambda, t + s);
                const double nested = cumulant(mech, cumulant(mech, lambda, s), t);
                CHECK(direct == doctest::Approx(nested).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("randomized semigroup property") {
    Rng gen(31337, 2);
    for (int iter = 0; iter < 6; ++iter) {
        const double beta = 0.2 + 1.3 * gen.uniform();
        const double alpha = 0.3 + 1.2 * gen.uniform();
        std::vector<JumpAtom> atoms;
        if (gen.uniform() < 0.5) {
            atoms.push_back({0.3 + 2.0 * gen.uniform(), gen.uniform()});
        }
        const auto mech =
            BranchingMechanism::constant(beta, alpha, JumpMeasure::from_atoms(atoms));
        const double lambda = 0.2 + 4.0 * gen.uniform();
        const double s = 0.3 + gen.uniform();
        const double t = 0.3 + gen.uniform();
        const double direct = cumulant(mech, lambda, t + s);
        const double nested = cumulant(mech, cumulant(mech, lambda, s), t);
        CHECK(direct == doctest::Approx(nested).epsilon(1e-8));
    }
}

TEST_CASE("cumulant monotone in lambda and attracted to z_psi") {
    const double z = root_zpsi(kQuad).z;
    double prev = 0.0;
    for (double lambda : {0.1, 0.5, 1.0, 2.0, 8.0}) {
        const double v = cumulant(kQuad, lambda, 1.5);
        CHECK(v >= prev);
        prev = v;
    }
    for (double lambda : {0.2, 5.0}) {
        CHECK(cumulant(kQuad, lambda, 30.0) == doctest::Approx(z).epsilon(1e-6));
    }
}

TEST_CASE("extinction by finite time") {
    // beta = alpha = 1: vbar_t = 1/(1 - e^{-t}).
    const VbarResult v1 = extinction_vbar(kQuad, 1.0);
    CHECK(v1.value == doctest::Approx(1.0 / (1.0 - std::exp(-1.0))).epsilon(1e-6));
    const VbarResult v10 = extinction_vbar(kQuad, 10.0);
    CHECK(v10.value == doctest::Approx(1.0 / (1.0 - std::exp(-10.0))).epsilon(1e-6));

    CHECK(extinction_by(kQuad, 1.0, 0.0) == doctest::Approx(1.0));
    CHECK(extinction_by(kQuad, 1.0, 2.0) ==
          doctest::Approx(std::exp(-2.0 / (1.0 - std::exp(-1.0)))).epsilon(1e-6));

    // Grey fails -> no finite-time extinction.
    CHECK_THROWS_AS(extinction_by(BranchingMechanism::constant(-1.0, 0.0), 1.0, 1.0),
                    std::runtime_error);
}

TEST_CASE("ultimate extinction probability") {
    CHECK(extinction_prob(kQuad, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    CHECK(extinction_prob(kQuad, 0.0) == doctest::Approx(1.0));
    CHECK(extinction_prob(BranchingMechanism::constant(2.0, 1.0), 1.0) ==
          doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("euler paths: absorption and degenerate inputs") {
    Rng rng(3, 1);
    const CbPath zero = simulate_cb(kQuad, 0.0, 1.0, 1e-3, rng);
    CHECK(zero.extinct);
    for (double y : zero.y) {
        CHECK(y == 0.0);
    }
    CHECK_THROWS_AS(simulate_cb(kQuad, 1.0, 1.0, 0.0, rng), std::invalid_argument);
    const auto jumpy = BranchingMechanism::constant(1.0, 1.0, JumpMeasure::from_atoms({{1.0, 1.0}}));
    CHECK_THROWS_AS(simulate_cb(jumpy, 1.0, 1.0, 1e-3, rng), std::invalid_argument);
}

TEST_CASE("euler mean matches the first-moment ODE") {
    const int n = 4'000;
    const double horizon = 2.0;
    std::vector<double> finals(n);
    for (int r = 0; r < n; ++r) {
        Rng rng = make_stream(101, static_cast<std::uint64_t>(r), stream_tag::kCbPath);
        finals[static_cast<std::size_t>(r)] = simulate_cb(kQuad, 1.0, horizon, 1e-3, rng).y.back();
    }
    const Summary s = summarize(finals);
    CHECK(std::abs(z_score(s.mean, s.se, std::exp(horizon))) < 3.0);
}

TEST_CASE("euler extinct fraction tracks extinction_by") {
    const int n = 4'000;
    const double horizon = 3.0;
    int extinct = 0;
    for (int r = 0; r < n; ++r) {
        Rng rng = make_stream(102, static_cast<std::uint64_t>(r), stream_tag::kCbPath);
        if (simulate_cb(kQuad, 1.0, horizon, 1e-3, rng).extinct) {
            ++extinct;
        }
    }
    const double frac = static_cast<double>(extinct) / n;
    const double target = extinction_by(kQuad, horizon, 1.0);
    const double se = binomial_se(frac, static_cast<std::size_t>(n));
    // Euler absorption carries an O(sqrt(dt)) bias; allow it on top of the
    // Monte Carlo band.
    CHECK(std::abs(frac - target) <= 3.0 * se + 0.25 * std::sqrt(1e-3));
}

TEST_CASE("laplace check") {
    const LaplaceCheck trivial = laplace_check(kQuad, 0.0, 1.0, 1.0, 200, 1e-2, 5);
    CHECK(trivial.empirical == doctest::Approx(1.0));
    CHECK(trivial.analytic == doctest::Approx(1.0));

    // lambda = z_psi: the analytic side is constant in t.
    CHECK(laplace_check(kQuad, 1.0, 0.5, 1.0, 64, 1e-2, 6).analytic ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    CHECK(laplace_check(kQuad, 1.0, 2.5, 1.0, 64, 1e-2, 6).analytic ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-8));

    const LaplaceCheck mc = laplace_check(kQuad, 1.0, 2.0, 1.0, 10'000, 1e-3, 7);
    CHECK(std::abs(mc.z) < 3.0);
}
