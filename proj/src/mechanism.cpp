#include "superbranch/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "superbranch/quadrature.hpp"

namespace superbranch {

namespace {

// (e^{-u} - 1 + u), accurate for small u.
double expm1_compensated(double u) {
    if (std::abs(u) < 1e-4) {
        const double u2 = u * u;
        return u2 / 2.0 - u2 * u / 6.0 + u2 * u2 / 24.0;
    }
    return std::expm1(-u) + u;
}

}  // namespace

Field Field::fn(std::function<double(std::span<const double>)> f, double sup_norm) {
    if (!f) {
        throw std::invalid_argument("Field::fn: empty callable");
    }
    if (!(sup_norm >= 0.0) || !std::isfinite(sup_norm)) {
        throw std::invalid_argument("Field::fn: sup norm must be finite and nonnegative");
    }
    Field out;
    out.constant_ = false;
    out.fn_ = std::move(f);
    out.sup_ = sup_norm;
    return out;
}

double Field::value() const {
    if (!constant_) {
        throw std::logic_error("Field::value: field is not constant");
    }
    return value_;
}

JumpMeasure JumpMeasure::from_atoms(std::vector<JumpAtom> atoms) {
    JumpMeasure m;
    for (const JumpAtom& a : atoms) {
        if (!(a.location > 0.0) || !std::isfinite(a.location)) {
            throw std::invalid_argument("JumpMeasure: atom locations must be strictly positive");
        }
        if (a.mass < 0.0 || !std::isfinite(a.mass)) {
            throw std::invalid_argument("JumpMeasure: atom masses must be nonnegative");
        }
        if (a.mass > 0.0) {
            m.atoms_.push_back(a);
        }
    }
    std::sort(m.atoms_.begin(), m.atoms_.end(),
              [](const JumpAtom& a, const JumpAtom& b) { return a.location < b.location; });
    if (!std::isfinite(m.y_and_y2())) {
        throw std::invalid_argument("JumpMeasure: integral of y wedge y^2 is not finite");
    }
    return m;
}

JumpMeasure JumpMeasure::from_density(const std::function<double(double)>& density,
                                      double y_min, double y_max, int points) {
    if (!(y_min > 0.0) || !(y_max > y_min) || points < 2) {
        throw std::invalid_argument("JumpMeasure::from_density: need 0 < y_min < y_max, points >= 2");
    }
    // Trapezoid weights on a log-spaced grid.
    std::vector<JumpAtom> atoms(static_cast<std::size_t>(points));
    const double lmin = std::log(y_min);
    const double step = (std::log(y_max) - lmin) / (points - 1);
    for (int i = 0; i < points; ++i) {
        atoms[static_cast<std::size_t>(i)].location = std::exp(lmin + i * step);
    }
    for (int i = 0; i < points; ++i) {
        const double y = atoms[static_cast<std::size_t>(i)].location;
        const double rho = density(y);
        if (rho < 0.0 || !std::isfinite(rho)) {
            throw std::invalid_argument("JumpMeasure::from_density: density must be finite and nonnegative");
        }
        double dy = 0.0;
        if (i > 0) {
            dy += 0.5 * (y - atoms[static_cast<std::size_t>(i - 1)].location);
        }
        if (i + 1 < points) {
            dy += 0.5 * (atoms[static_cast<std::size_t>(i + 1)].location - y);
        }
        atoms[static_cast<std::size_t>(i)].mass = rho * dy;
    }
    return from_atoms(std::move(atoms));
}

double JumpMeasure::total_mass() const {
    double acc = 0.0;
    for (const JumpAtom& a : atoms_) {
        acc += a.mass;
    }
    return acc;
}

double JumpMeasure::y_and_y2() const {
    double acc = 0.0;
    for (const JumpAtom& a : atoms_) {
        acc += a.mass * std::min(a.location, a.location * a.location);
    }
    return acc;
}

JumpMeasure JumpMeasure::exp_tilted(double w) const {
    if (!(w > 0.0)) {
        throw std::invalid_argument("JumpMeasure::exp_tilted: w must be positive");
    }
    JumpMeasure out;
    out.atoms_ = atoms_;
    for (JumpAtom& a : out.atoms_) {
        a.mass *= std::exp(-w * a.location);
    }
    return out;
}

BranchingMechanism BranchingMechanism::constant(double beta, double alpha, JumpMeasure pi) {
    BranchingMechanism m;
    m.constant_ = true;
    m.beta_ = Field(beta);
    m.alpha_ = Field(alpha);
    m.pi_ = std::move(pi);
    m.validate();
    return m;
}

BranchingMechanism BranchingMechanism::spatial(Field beta, Field alpha, JumpMeasure pi,
                                               Field pi_scale) {
    BranchingMechanism m;
    m.beta_ = std::move(beta);
    m.alpha_ = std::move(alpha);
    m.pi_ = std::move(pi);
    m.pi_scale_ = std::move(pi_scale);
    m.constant_ = m.beta_.is_constant() && m.alpha_.is_constant() && m.pi_scale_.is_constant();
    if (m.constant_ && m.pi_scale_.value() != 1.0) {
        std::vector<JumpAtom> scaled = m.pi_.atoms();
        for (JumpAtom& a : scaled) {
            a.mass *= m.pi_scale_.value();
        }
        m.pi_ = JumpMeasure::from_atoms(std::move(scaled));
        m.pi_scale_ = Field(1.0);
    }
    m.validate();
    return m;
}

void BranchingMechanism::validate() const {
    if (!std::isfinite(beta_.sup()) || !std::isfinite(alpha_.sup())) {
        throw std::invalid_argument("BranchingMechanism: beta/alpha sup norms must be finite");
    }
    if (alpha_.is_constant() && alpha_.value() < 0.0) {
        throw std::invalid_argument("BranchingMechanism: alpha must be nonnegative");
    }
    if (pi_scale_.is_constant() && pi_scale_.value() < 0.0) {
        throw std::invalid_argument("BranchingMechanism: pi scale must be nonnegative");
    }
    // Mechanisms with alpha + pi identically zero are degenerate as branching
    // laws (no randomness); they stay constructible for root/Grey analytics
    // and are flagged downstream (skeleton_law reports q = 0).
}

double BranchingMechanism::beta_const() const {
    if (!constant_) {
        throw std::logic_error("BranchingMechanism: not spatially constant");
    }
    return beta_.value();
}

double BranchingMechanism::alpha_const() const {
    if (!constant_) {
        throw std::logic_error("BranchingMechanism: not spatially constant");
    }
    return alpha_.value();
}

double BranchingMechanism::psi0(std::span<const double> x, double lambda) const {
    if (lambda < 0.0) {
        throw std::invalid_argument("psi0: lambda must be nonnegative");
    }
    double v = alpha_(x) * lambda * lambda;
    if (!pi_.is_zero()) {
        v += pi_scale_(x) * pi_.integrate([lambda](double y) {
            return expm1_compensated(lambda * y);
        });
    }
    return v;
}

double BranchingMechanism::psi(std::span<const double> x, double lambda) const {
    return psi0(x, lambda) - beta_(x) * lambda;
}

double BranchingMechanism::psi0_prime(std::span<const double> x, double lambda) const {
    if (lambda < 0.0) {
        throw std::invalid_argument("psi0_prime: lambda must be nonnegative");
    }
    double v = 2.0 * alpha_(x) * lambda;
    if (!pi_.is_zero()) {
        v += pi_scale_(x) * pi_.integrate([lambda](double y) {
            return y * (-std::expm1(-lambda * y));
        });
    }
    return v;
}

double BranchingMechanism::psi_prime(std::span<const double> x, double lambda) const {
    return psi0_prime(x, lambda) - beta_(x);
}

double BranchingMechanism::psi(double lambda) const {
    return psi(std::span<const double>{}, lambda);
}

double BranchingMechanism::psi0(double lambda) const {
    return psi0(std::span<const double>{}, lambda);
}

double BranchingMechanism::psi_prime(double lambda) const {
    return psi_prime(std::span<const double>{}, lambda);
}

double BranchingMechanism::psi0_prime(double lambda) const {
    return psi0_prime(std::span<const double>{}, lambda);
}

BranchingMechanism BranchingMechanism::tilt(double w) const {
    if (!(w > 0.0)) {
        throw std::invalid_argument("tilt: w must be strictly positive");
    }
    JumpMeasure tilted = pi_.exp_tilted(w);
    const JumpMeasure& base = pi_;
    if (constant_) {
        double beta_star = beta_.value() - 2.0 * alpha_.value() * w;
        beta_star -= base.integrate([w](double y) { return (-std::expm1(-w * y)) * y; });
        return BranchingMechanism::constant(beta_star, alpha_.value(), std::move(tilted));
    }
    const Field beta = beta_;
    const Field alpha = alpha_;
    const Field scale = pi_scale_;
    const double jump_term_sup = base.integrate([w](double y) { return (-std::expm1(-w * y)) * y; });
    Field beta_star = Field::fn(
        [beta, alpha, scale, base, w](std::span<const double> x) {
            double v = beta(x) - 2.0 * alpha(x) * w;
            v -= scale(x) * base.integrate([w](double y) { return (-std::expm1(-w * y)) * y; });
            return v;
        },
        beta.sup() + 2.0 * alpha.sup() * w + scale.sup() * jump_term_sup);
    return BranchingMechanism::spatial(std::move(beta_star), alpha_, std::move(tilted), pi_scale_);
}

ZpsiResult root_zpsi(const BranchingMechanism& mech) {
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("root_zpsi: mechanism must be spatially constant");
    }
    constexpr double kTol = 1e-12;
    constexpr double kLambdaMax = 1e12;

    // psi(0) = 0 always; psi is convex. If psi'(0+) >= 0 then psi >= 0 on
    // (0,inf) and the root is 0 (unless psi vanishes identically beyond 0,
    // which the non-triviality assumption rules out for lambda large).
    if (mech.psi_prime(0.0) >= 0.0) {
        return {0.0, false};
    }
    // Bracket the upper sign change.
    double hi = 1.0;
    while (hi < kLambdaMax && mech.psi(hi) <= 0.0) {
        hi *= 2.0;
    }
    if (hi >= kLambdaMax) {
        // psi <= 0 over the whole scanned range; superlinear growth would have
        // produced a sign change by now.
        return {std::numeric_limits<double>::infinity(), true};
    }
    double lo = hi / 2.0;
    // Establish lo with psi(lo) <= 0 (the doubling loop guarantees it unless
    // hi stayed at 1).
    if (!(mech.psi(lo) <= 0.0)) {
        lo = 0.0;
    }
    while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        if (mech.psi(mid) <= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {0.5 * (lo + hi), false};
}

GreyResult grey_check(const BranchingMechanism& mech) {
    if (!mech.spatially_constant()) {
        throw std::invalid_argument("grey_check: mechanism must be spatially constant");
    }
    const ZpsiResult z = root_zpsi(mech);
    if (z.infinite) {
        throw std::runtime_error("grey_check: psi <= 0 on the whole scanned range; "
                                 "not supercritical-extinguishable");
    }
    GreyResult out;
    if (mech.alpha_const() > 0.0) {
        // Quadratic term dominates: integral of 1/psi converges analytically.
        out.holds = true;
        out.analytic = true;
        out.confident = true;
        return out;
    }
    // Numeric path: Cauchy test of int dl/psi over geometrically growing
    // cutoffs, with a geometric tail estimate from the last increment ratio.
    const double l0 = 2.0 * z.z + 1.0;
    auto inv_psi_log = [&mech](double u) {
        const double lambda = std::exp(u);
        const double p = mech.psi(lambda);
        if (!(p > 0.0)) {
            throw std::runtime_error("grey_check: psi not positive beyond 2 z_psi + 1");
        }
        return lambda / p;   // d lambda = lambda du
    };
    constexpr int kBlocks = 12;
    const double log4 = std::log(4.0);
    std::vector<double> increments;
    double u_lo = std::log(l0);
    for (int k = 0; k < kBlocks; ++k) {
        const double u_hi = u_lo + log4;
        increments.push_back(integrate(inv_psi_log, u_lo, u_hi, 8));
        u_lo = u_hi;
    }
    const double last = increments.back();
    const double prev = increments[increments.size() - 2];
    const double ratio = prev > 0.0 ? last / prev : 0.0;
    if (ratio < 0.95) {
        out.holds = true;
        out.tail_estimate = ratio < 1.0 ? last * ratio / (1.0 - ratio)
                                        : std::numeric_limits<double>::infinity();
        out.confident = ratio <= 0.8;
    } else {
        out.holds = false;
        out.tail_estimate = std::numeric_limits<double>::infinity();
        // Clean divergence shows increments with ratio ~ 1; anything else in
        // the ambiguous band is reported without confidence.
        out.confident = ratio >= 0.98 && ratio <= 1.05;
    }
    return out;
}

double SkeletonLaw::mean_offspring() const {
    double m = 0.0;
    for (std::size_t j = 0; j < pk.size(); ++j) {
        m += static_cast<double>(j + 2) * pk[j];
    }
    return m;
}

SkeletonLaw skeleton_law(const BranchingMechanism& mech, double w,
                         std::span<const double> x, int k_max) {
    if (!(w > 0.0)) {
        throw std::invalid_argument("skeleton_law: w must be strictly positive");
    }
    if (k_max < 2) {
        throw std::invalid_argument("skeleton_law: k_max must be at least 2");
    }
    SkeletonLaw law;
    law.w = w;
    const double alpha = mech.alpha(x);
    const double scale = mech.pi_scale(x);
    const JumpMeasure& pi = mech.jumps();

    // q = psi0'(w) - psi0(w)/w; q w p_k = alpha w^2 1{k=2} + w^k int y^k/k! pi*(dy).
    const double q = mech.psi0_prime(x, w) - mech.psi0(x, w) / w;
    if (!(q > 1e-300)) {
        law.degenerate = true;
        return law;
    }
    law.q = q;
    law.pk.assign(static_cast<std::size_t>(k_max - 1), 0.0);
    law.y_law.assign(static_cast<std::size_t>(k_max - 1), {});
    const double qw = q * w;
    for (int k = 2; k <= k_max; ++k) {
        const std::size_t j = static_cast<std::size_t>(k - 2);
        double mass = 0.0;
        std::vector<JumpAtom>& ylaw = law.y_law[j];
        if (k == 2 && alpha > 0.0) {
            const double m0 = alpha * w * w;
            ylaw.push_back({0.0, m0});
            mass += m0;
        }
        if (!pi.is_zero()) {
            for (const JumpAtom& a : pi.atoms()) {
                // w^k y^k e^{-wy} m / k!, evaluated in log space.
                const double wy = w * a.location;
                const double lg = static_cast<double>(k) * std::log(wy) - std::lgamma(k + 1.0) - wy;
                const double m = scale * a.mass * std::exp(lg);
                if (m > 0.0) {
                    ylaw.push_back({a.location, m});
                    mass += m;
                }
            }
        }
        law.pk[j] = mass / qw;
        if (mass > 0.0) {
            for (JumpAtom& a : ylaw) {
                a.mass /= mass;
            }
        }
    }
    double total = 0.0;
    for (double p : law.pk) {
        total += p;
    }
    law.tail_mass = std::max(0.0, 1.0 - total);
    return law;
}

namespace {

double log_plus(double v) {
    return v > 1.0 ? std::log(v) : 0.0;
}

double log_star(double v) {
    constexpr double e = 2.718281828459045235360287;
    return v <= e ? v / e : std::log(v);
}

}  // namespace

LlogLValue llogl_value(const BranchingMechanism& mech,
                       const std::function<double(double)>& h,
                       const std::function<double(double)>& m_density,
                       double lo, double hi, int panels) {
    auto integrand = [&](double x) {
        const double pt[1] = {x};
        const std::span<const double> xs(pt, 1);
        const double hx = h(x);
        double v = mech.alpha(xs) * log_plus(hx);
        if (!mech.jumps().is_zero()) {
            v += mech.pi_scale(xs) *
                 mech.jumps().integrate([hx](double r) { return r * log_star(r * hx); });
        }
        return v * hx * hx * m_density(x);
    };
    const RefinedIntegral r = integrate_refined(integrand, lo, hi, panels, 1e-8);
    LlogLValue out;
    out.value = r.value;
    out.finite = std::isfinite(r.value);
    out.converged = r.converged;
    out.rel_err = r.rel_err;
    return out;
}

ImmigrationRates immigration_rates(const BranchingMechanism& mech, double w,
                                   std::span<const double> x) {
    if (!(w > 0.0)) {
        throw std::invalid_argument("immigration_rates: w must be strictly positive");
    }
    ImmigrationRates out;
    out.continuous_rate = 2.0 * mech.alpha(x);
    const double scale = mech.pi_scale(x);
    for (const JumpAtom& a : mech.jumps().atoms()) {
        const double weight = a.location * std::exp(-w * a.location) * a.mass * scale;
        if (weight > 0.0) {
            out.kernel.push_back({a.location, weight});
        }
    }
    return out;
}

}  // namespace superbranch
