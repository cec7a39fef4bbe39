#pragma once

#include <limits>
#include <string>
#include <string_view>

#include "ewa/rng.hpp"

namespace ewa {

enum class FamilyKind { Gaussian, Bernoulli, Poisson };

std::string_view to_string(FamilyKind kind);
FamilyKind parse_family_kind(std::string_view name);

/// Closed interval [lo, hi]; either end may be infinite.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double t) const { return t >= lo && t <= hi; }
    std::string describe() const;
};

/// One-parameter natural exponential family with canonical link:
///   f(y; theta) = exp{(y theta - b(theta)) / a + c(y, a)}.
/// c(y, a) cancels in every quantity used here and is not represented.
///
/// The curvature bounds are sup and inf of b'' over the natural-parameter
/// interval and are computed at construction.
class Family {
public:
    /// Throws ConfigError for non-positive scale, empty interval, or an
    /// unbounded Poisson interval.
    Family(FamilyKind kind, double scale_a, Interval theta);

    static Family gaussian(double sigma2 = 1.0, Interval theta = {});
    static Family bernoulli(Interval theta = {});
    /// Poisson needs a finite upper bound so that b'' stays bounded.
    static Family poisson(Interval theta = {-std::numeric_limits<double>::infinity(), 3.0});

    FamilyKind kind() const { return kind_; }
    double scale() const { return scale_a_; }
    const Interval& theta_interval() const { return theta_; }
    double curvature_upper() const { return curvature_U_; }
    double curvature_lower() const { return curvature_L_; }

    /// Throws DomainError naming the interval when theta is outside it.
    void check_domain(double theta) const;

private:
    FamilyKind kind_;
    double scale_a_;
    Interval theta_;
    double curvature_U_ = 0.0;
    double curvature_L_ = 0.0;
};

/// b(theta)
double cumulant(const Family& family, double theta);
/// b'(theta) = E[Y]
double mean(const Family& family, double theta);
/// b''(theta); Var[Y] = a * b''(theta)
double variance_rate(const Family& family, double theta);

/// Domain-unchecked versions for inner loops.
namespace detail {
double cumulant(FamilyKind kind, double theta);
double mean(FamilyKind kind, double theta);
double variance_rate(FamilyKind kind, double theta);
}  // namespace detail

/// One draw of Y from f_theta. Bernoulli and Poisson require a == 1.
double sample_response(const Family& family, double theta, Rng& rng);

}  // namespace ewa
