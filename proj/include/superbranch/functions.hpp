#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "superbranch/stats.hpp"

namespace superbranch {

// Test functions with closed-form Gaussian integrals: constants, Gaussian
// bumps exp(-a|x-x0|^2) and axis-aligned boxes. These are the functionals the
// statistical checks integrate against analytically.
class TestFunction {
  public:
    enum class Kind { Constant, Gaussian, Box };

    static TestFunction constant(double value) {
        TestFunction f;
        f.kind_ = Kind::Constant;
        f.value_ = value;
        f.name_ = "const";
        return f;
    }

    static TestFunction gaussian(double a, std::vector<double> center) {
        if (!(a > 0.0)) {
            throw std::invalid_argument("TestFunction::gaussian: a must be positive");
        }
        TestFunction f;
        f.kind_ = Kind::Gaussian;
        f.value_ = a;
        f.center_ = std::move(center);
        f.name_ = "gauss";
        return f;
    }

    // Product box: |x_i - center_i| <= half_width for every coordinate.
    static TestFunction box(std::vector<double> center, double half_width) {
        if (!(half_width > 0.0)) {
            throw std::invalid_argument("TestFunction::box: half_width must be positive");
        }
        TestFunction f;
        f.kind_ = Kind::Box;
        f.value_ = half_width;
        f.center_ = std::move(center);
        f.name_ = "box";
        return f;
    }

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    double operator()(std::span<const double> x) const {
        switch (kind_) {
            case Kind::Constant:
                return value_;
            case Kind::Gaussian: {
                double q = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double d = x[i] - center_at(i);
                    q += d * d;
                }
                return std::exp(-value_ * q);
            }
            case Kind::Box: {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    if (std::abs(x[i] - center_at(i)) > value_) {
                        return 0.0;
                    }
                }
                return 1.0;
            }
        }
        return 0.0;
    }

    // E[f(Y)] for Y ~ Normal(mean, diag(var)), coordinatewise closed form.
    double gaussian_expectation(std::span<const double> mean, double var) const {
        switch (kind_) {
            case Kind::Constant:
                return value_;
            case Kind::Gaussian: {
                const double a = value_;
                const double denom = 1.0 + 2.0 * a * var;
                double out = 1.0;
                for (std::size_t i = 0; i < mean.size(); ++i) {
                    const double d = mean[i] - center_at(i);
                    out *= std::exp(-a * d * d / denom) / std::sqrt(denom);
                }
                return out;
            }
            case Kind::Box: {
                const double sd = std::sqrt(var);
                double out = 1.0;
                for (std::size_t i = 0; i < mean.size(); ++i) {
                    const double lo = center_at(i) - value_;
                    const double hi = center_at(i) + value_;
                    out *= normal_cdf((hi - mean[i]) / sd) - normal_cdf((lo - mean[i]) / sd);
                }
                return out;
            }
        }
        return 0.0;
    }

  private:
    double center_at(std::size_t i) const {
        if (center_.empty()) {
            return 0.0;
        }
        return i < center_.size() ? center_[i] : center_.back();
    }

    Kind kind_ = Kind::Constant;
    double value_ = 1.0;          // constant value, gaussian decay a, or box half width
    std::vector<double> center_;
    std::string name_;
};

}  // namespace superbranch
