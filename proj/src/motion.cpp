#include "superbranch/motion.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "superbranch/stats.hpp"

namespace superbranch {

namespace {

void check_dim(const MotionModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.dim) {
        throw std::invalid_argument("MotionModel: point dimension mismatch");
    }
}

double sq_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return s;
}

double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

}  // namespace

double MotionModel::step_decay(double dt) const {
    return kind == MotionKind::InwardOu ? std::exp(-c * dt) : std::exp(c * dt);
}

double MotionModel::step_var(double dt) const {
    if (kind == MotionKind::InwardOu) {
        return -std::expm1(-2.0 * c * dt) / (2.0 * c);
    }
    return std::expm1(2.0 * c * dt) / (2.0 * c);
}

void MotionModel::step(std::span<const double> x, double dt, Rng& rng,
                       std::span<double> out) const {
    check_dim(*this, x);
    if (dt < 0.0) {
        throw std::invalid_argument("MotionModel::step: dt must be nonnegative");
    }
    if (dt == 0.0) {
        for (int i = 0; i < dim; ++i) {
            out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
        }
        return;
    }
    const double decay = step_decay(dt);
    const double sd = std::sqrt(step_var(dt));
    for (int i = 0; i < dim; ++i) {
        out[static_cast<std::size_t>(i)] =
            decay * x[static_cast<std::size_t>(i)] + sd * rng.normal();
    }
}

double MotionModel::m_density(std::span<const double> x) const {
    check_dim(*this, x);
    const double norm = std::pow(c / M_PI, 0.5 * dim);
    if (kind == MotionKind::InwardOu) {
        return norm * std::exp(-c * sq_norm(x));
    }
    return std::exp(c * sq_norm(x)) / norm;
}

double MotionModel::transition_density(double t, std::span<const double> x,
                                       std::span<const double> y) const {
    check_dim(*this, x);
    check_dim(*this, y);
    if (!(t > 0.0)) {
        throw std::invalid_argument("transition_density: t must be positive");
    }
    const double decay = step_decay(t);
    const double var = step_var(t);
    double log_gauss = -0.5 * dim * std::log(2.0 * M_PI * var);
    for (int i = 0; i < dim; ++i) {
        const double d = y[static_cast<std::size_t>(i)] - decay * x[static_cast<std::size_t>(i)];
        log_gauss -= d * d / (2.0 * var);
    }
    return std::exp(log_gauss) / m_density(y);
}

MotionModel inward_ou(double c, int d) {
    if (!(c > 0.0)) {
        throw std::invalid_argument("inward_ou: c must be positive");
    }
    if (d < 1 || d > 16) {
        throw std::invalid_argument("inward_ou: dimension must be in [1,16]");
    }
    MotionModel m;
    m.kind = MotionKind::InwardOu;
    m.dim = d;
    m.c = c;
    m.name = "inward_ou";
    return m;
}

MotionModel outward_ou(double c, int d) {
    if (!(c > 0.0)) {
        throw std::invalid_argument("outward_ou: c must be positive");
    }
    if (d < 1 || d > 16) {
        throw std::invalid_argument("outward_ou: dimension must be in [1,16]");
    }
    MotionModel m;
    m.kind = MotionKind::OutwardOu;
    m.dim = d;
    m.c = c;
    m.name = "outward_ou";
    return m;
}

double ou_expectation(const MotionModel& motion, const TestFunction& f,
                      std::span<const double> x, double t) {
    check_dim(motion, x);
    if (t < 0.0) {
        throw std::invalid_argument("ou_expectation: t must be nonnegative");
    }
    if (t == 0.0) {
        return f(x);
    }
    const double decay = motion.step_decay(t);
    std::vector<double> mean(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean[i] = decay * x[i];
    }
    return f.gaussian_expectation(mean, motion.step_var(t));
}

double pbeta_expectation(const MotionModel& motion, double beta, const TestFunction& f,
                         std::span<const double> x, double t) {
    return std::exp(beta * t) * ou_expectation(motion, f, x, t);
}

double SpectralData::h(std::span<const double> x) const {
    if (example == ExampleId::InwardOuQuadratic) {
        return 1.0;
    }
    return std::pow(c / M_PI, 0.5 * dim) * std::exp(-c * sq_norm(x));
}

double SpectralData::m_density(std::span<const double> x) const {
    const double norm = std::pow(c / M_PI, 0.5 * dim);
    if (example == ExampleId::InwardOuQuadratic) {
        return norm * std::exp(-c * sq_norm(x));
    }
    return std::exp(c * sq_norm(x)) / norm;
}

double SpectralData::h2m_density(std::span<const double> x) const {
    // Both examples share h^2 m = (c/pi)^{d/2} e^{-c|x|^2}.
    return std::pow(c / M_PI, 0.5 * dim) * std::exp(-c * sq_norm(x));
}

SpectralData spectral_for_example(ExampleId example, double c, int d,
                                  const BranchingMechanism& mech) {
    if (!(c > 0.0) || d < 1) {
        throw std::invalid_argument("spectral_for_example: need c > 0 and d >= 1");
    }
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("spectral_for_example: mechanism must be spatially constant");
    }
    const double beta = mech.beta_const();
    SpectralData s;
    s.example = example;
    s.dim = d;
    s.c = c;
    s.lambda_h = c;   // gap of the OU generator
    if (example == ExampleId::InwardOuQuadratic) {
        if (!(beta > 0.0)) {
            throw std::invalid_argument("spectral_for_example: example 1 requires beta > 0");
        }
        s.lambda1 = -beta;
    } else {
        if (!(beta > c * d)) {
            throw std::invalid_argument("spectral_for_example: not supercritical (beta <= c d)");
        }
        s.lambda1 = c * d - beta;
    }
    const ZpsiResult z = root_zpsi(mech);
    if (z.infinite || !(z.z > 0.0)) {
        throw std::invalid_argument("spectral_for_example: z_psi must lie in (0,inf)");
    }
    s.w = z.z;
    return s;
}

MotionModel h_transform(const MotionModel& motion, const BranchingMechanism& mech,
                        const SpectralData& spectral) {
    (void)mech;
    if (motion.killed) {
        throw std::invalid_argument("h_transform: motion already carries killing");
    }
    if (spectral.example == ExampleId::InwardOuQuadratic) {
        // P^h_t = P_t: the transform is the identity in law.
        return motion;
    }
    return inward_ou(motion.c, motion.dim);
}

ReweightedEstimate h_reweighted_expectation(const MotionModel& motion,
                                            const SpectralData& spectral, double beta,
                                            const TestFunction& f, std::span<const double> x,
                                            double t, int samples, std::uint64_t seed) {
    if (samples <= 0) {
        throw std::invalid_argument("h_reweighted_expectation: samples must be positive");
    }
    const double hx = spectral.h(x);
    const double growth = std::exp((spectral.lambda1 + beta) * t);
    std::vector<double> vals(static_cast<std::size_t>(samples));
    std::vector<double> y(x.size());
    for (int i = 0; i < samples; ++i) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(i), stream_tag::kMotionCheck);
        motion.step(x, t, rng, y);
        vals[static_cast<std::size_t>(i)] = growth * spectral.h(y) / hx * f(y);
    }
    const Summary s = summarize(vals);
    return {s.mean, s.se};
}

MotionModel w_transform(const MotionModel& motion, const BranchingMechanism& mech, double w) {
    if (!(w > 0.0)) {
        throw std::invalid_argument("w_transform: w must be strictly positive");
    }
    if (mech.spatially_constant()) {
        const double gamma = mech.psi(w) / w;
        if (std::abs(gamma) <= 1e-12) {
            return motion;
        }
        if (gamma < 0.0) {
            throw std::invalid_argument("w_transform: negative kill rate psi(w)/w is an "
                                        "unsupported configuration");
        }
        MotionModel out = motion;
        out.killed = true;
        out.kill_rate = Field(gamma);
        out.kill_sup = gamma;
        return out;
    }
    // Probe the sign of gamma on a lattice; rejected when indefinite.
    double gamma_max = 0.0;
    std::vector<double> pt(static_cast<std::size_t>(motion.dim), 0.0);
    const int n_probe = 201;
    for (int i = 0; i < n_probe; ++i) {
        pt[0] = -10.0 + 20.0 * i / (n_probe - 1);
        const double gamma = mech.psi(pt, w) / w;
        if (gamma < -1e-9) {
            throw std::invalid_argument("w_transform: sign-indefinite kill rate is an "
                                        "unsupported configuration");
        }
        gamma_max = std::max(gamma_max, gamma);
    }
    MotionModel out = motion;
    out.killed = true;
    const BranchingMechanism mech_copy = mech;
    out.kill_rate = Field::fn(
        [mech_copy, w](std::span<const double> x) {
            return std::max(mech_copy.psi(x, w) / w, 0.0);
        },
        gamma_max);
    out.kill_sup = gamma_max;
    return out;
}

double ph_density(double c, int d, double t, std::span<const double> x,
                  std::span<const double> y) {
    if (!(t > 0.0)) {
        throw std::invalid_argument("ph_density: t must be positive");
    }
    if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d) {
        throw std::invalid_argument("ph_density: dimension mismatch");
    }
    const double e2 = std::exp(2.0 * c * t);
    const double pref = std::pow(-std::expm1(-2.0 * c * t), -0.5 * d);
    const double quad = sq_norm(x) + sq_norm(y) - 2.0 * std::exp(c * t) * dot(x, y);
    return pref * std::exp(-c * quad / (e2 - 1.0));
}

double a_tilde(double c, int d, double t, std::span<const double> x) {
    return ph_density(c, d, t, x, x);
}

}  // namespace superbranch
