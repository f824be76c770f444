#pragma once

#include <functional>
#include <span>
#include <vector>

namespace superbranch {

// Bounded function of position. Either a constant (the common case here) or
// a callable with a caller-supplied sup-norm bound.
class Field {
  public:
    Field() : Field(0.0) {}

    Field(double c) : constant_(true), value_(c), sup_(std::abs(c)) {}

    static Field fn(std::function<double(std::span<const double>)> f, double sup_norm);

    double operator()(std::span<const double> x) const {
        return constant_ ? value_ : fn_(x);
    }

    bool is_constant() const { return constant_; }

    double value() const;     // requires is_constant()
    double sup() const { return sup_; }

  private:
    bool constant_ = true;
    double value_ = 0.0;
    double sup_ = 0.0;
    std::function<double(std::span<const double>)> fn_;
};

struct JumpAtom {
    double location = 0.0;   // y > 0
    double mass = 0.0;       // >= 0
};

// Spatial atom of a finite measure on E.
struct WeightedAtom {
    std::vector<double> position;
    double mass = 0.0;
};

// Jump measure pi(dy) on (0, infinity), held as a finite list of weighted
// atoms. Tabulated densities enter as quadrature atoms on a log-spaced grid,
// which keeps every integral against the measure a finite reproducible sum.
class JumpMeasure {
  public:
    JumpMeasure() = default;   // the zero measure

    static JumpMeasure from_atoms(std::vector<JumpAtom> atoms);

    // density(y) tabulated on a log-spaced grid over [y_min, y_max].
    static JumpMeasure from_density(const std::function<double(double)>& density,
                                    double y_min, double y_max, int points);

    bool is_zero() const { return atoms_.empty(); }
    const std::vector<JumpAtom>& atoms() const { return atoms_; }

    double total_mass() const;
    double y_and_y2() const;   // integral of (y ^ 1) wedge (y ^ 2)

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (const JumpAtom& a : atoms_) {
            acc += a.mass * f(a.location);
        }
        return acc;
    }

    // exp(-w y) pi(dy)
    JumpMeasure exp_tilted(double w) const;

  private:
    std::vector<JumpAtom> atoms_;
};

// The branching mechanism
//   psi_beta(x,l) = -beta(x) l + alpha(x) l^2 + int (e^{-ly} - 1 + ly) pi(x,dy)
// with pi(x,dy) = pi_scale(x) * pi(dy).
class BranchingMechanism {
  public:
    static BranchingMechanism constant(double beta, double alpha, JumpMeasure pi = {});

    static BranchingMechanism spatial(Field beta, Field alpha, JumpMeasure pi = {},
                                      Field pi_scale = Field(1.0));

    bool spatially_constant() const { return constant_; }

    double beta(std::span<const double> x) const { return beta_(x); }
    double alpha(std::span<const double> x) const { return alpha_(x); }
    double pi_scale(std::span<const double> x) const { return pi_scale_(x); }
    const JumpMeasure& jumps() const { return pi_; }

    double beta_const() const;
    double alpha_const() const;

    double beta_sup() const { return beta_.sup(); }
    double alpha_sup() const { return alpha_.sup(); }

    // psi_beta, psi_0 = psi_beta + beta l, and the lambda-derivatives.
    double psi(std::span<const double> x, double lambda) const;
    double psi0(std::span<const double> x, double lambda) const;
    double psi_prime(std::span<const double> x, double lambda) const;
    double psi0_prime(std::span<const double> x, double lambda) const;

    // Spatially constant shorthands.
    double psi(double lambda) const;
    double psi0(double lambda) const;
    double psi_prime(double lambda) const;
    double psi0_prime(double lambda) const;

    // Tilt by a constant martingale function w > 0:
    //   beta* = beta - 2 alpha w - int (1 - e^{-wy}) y pi(dy),
    //   alpha* = alpha, pi* = e^{-wy} pi(dy).
    BranchingMechanism tilt(double w) const;

  private:
    BranchingMechanism() = default;
    void validate() const;

    bool constant_ = true;
    Field beta_;
    Field alpha_;
    Field pi_scale_ = Field(1.0);
    JumpMeasure pi_;
};

struct ZpsiResult {
    double z = 0.0;
    bool infinite = false;
};

// z_psi = sup{l >= 0 : psi(l) <= 0}, bisection to absolute tolerance 1e-12.
ZpsiResult root_zpsi(const BranchingMechanism& mech);

struct GreyResult {
    bool holds = false;
    bool analytic = false;    // decided by alpha > 0, no quadrature involved
    bool confident = true;
    double tail_estimate = 0.0;
};

// Grey's condition: psi(inf) = inf and int^inf dl / psi(l) < inf.
GreyResult grey_check(const BranchingMechanism& mech);

// Offspring law of the skeleton at a point, from the generating function
//   G(x,s) = (1/w) [psi0(x,(1-s)w) - (1-s) psi0(x,w)].
struct SkeletonLaw {
    double q = 0.0;
    double w = 0.0;
    std::vector<double> pk;          // pk[j] = p_{j+2}
    double tail_mass = 0.0;          // pmf mass beyond k_max
    bool degenerate = false;         // q == 0: no branching at x
    // Branch-point mass law of Y_u given k offspring: (location, probability)
    // pairs; k = 2 includes the alpha w^2 atom at zero.
    std::vector<std::vector<JumpAtom>> y_law;

    double mean_offspring() const;
    int k_max() const { return static_cast<int>(pk.size()) + 1; }
};

SkeletonLaw skeleton_law(const BranchingMechanism& mech, double w,
                         std::span<const double> x, int k_max = 64);

struct LlogLValue {
    double value = 0.0;
    bool finite = true;
    bool converged = true;
    double rel_err = 0.0;
};

// L log L functional  <alpha log+ h, h^2> + <int r log*(r h(.)) pi(.,dr), h^2>
// by quadrature against h(x)^2 m(dx) on [lo, hi] (one-dimensional models).
LlogLValue llogl_value(const BranchingMechanism& mech,
                       const std::function<double(double)>& h,
                       const std::function<double(double)>& m_density,
                       double lo, double hi, int panels = 128);

struct ImmigrationRates {
    double continuous_rate = 0.0;        // 2 alpha(x)
    std::vector<JumpAtom> kernel;        // y e^{-w y} pi(x,dy) as weighted atoms
};

ImmigrationRates immigration_rates(const BranchingMechanism& mech, double w,
                                   std::span<const double> x);

}  // namespace superbranch
