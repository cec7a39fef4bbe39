#include "ewa/expfam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ewa/error.hpp"

namespace ewa {

namespace {

double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double bernoulli_curvature(double t) {
    if (std::isinf(t)) return 0.0;
    const double e = std::exp(-std::abs(t));
    return e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

std::string_view to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::Bernoulli: return "bernoulli";
        case FamilyKind::Poisson: return "poisson";
    }
    return "unknown";
}

FamilyKind parse_family_kind(std::string_view name) {
    if (name == "gaussian") return FamilyKind::Gaussian;
    if (name == "bernoulli" || name == "logistic") return FamilyKind::Bernoulli;
    if (name == "poisson") return FamilyKind::Poisson;
    throw ConfigError("unknown family kind '" + std::string(name) +
                      "' (expected gaussian, bernoulli or poisson)");
}

std::string Interval::describe() const {
    std::ostringstream os;
    os << '[' << lo << ", " << hi << ']';
    return os.str();
}

Family::Family(FamilyKind kind, double scale_a, Interval theta)
    : kind_(kind), scale_a_(scale_a), theta_(theta) {
    if (!(scale_a > 0.0) || !std::isfinite(scale_a))
        throw ConfigError("family scale a must be positive and finite, got " + std::to_string(scale_a));
    if (std::isnan(theta.lo) || std::isnan(theta.hi) || !(theta.lo < theta.hi))
        throw ConfigError("natural-parameter interval " + theta.describe() + " is empty");

    switch (kind) {
        case FamilyKind::Gaussian:
            curvature_U_ = curvature_L_ = 1.0;
            break;
        case FamilyKind::Bernoulli:
            // b'' is unimodal with its peak 1/4 at zero
            if (theta.lo <= 0.0 && theta.hi >= 0.0)
                curvature_U_ = 0.25;
            else
                curvature_U_ = std::max(bernoulli_curvature(theta.lo), bernoulli_curvature(theta.hi));
            curvature_L_ = std::min(bernoulli_curvature(theta.lo), bernoulli_curvature(theta.hi));
            break;
        case FamilyKind::Poisson:
            if (!std::isfinite(theta.hi))
                throw ConfigError("poisson family needs a finite upper bound on theta (b'' = e^theta is unbounded)");
            curvature_U_ = std::exp(theta.hi);
            curvature_L_ = std::isfinite(theta.lo) ? std::exp(theta.lo) : 0.0;
            break;
    }
}

Family Family::gaussian(double sigma2, Interval theta) {
    return Family(FamilyKind::Gaussian, sigma2, theta);
}

Family Family::bernoulli(Interval theta) { return Family(FamilyKind::Bernoulli, 1.0, theta); }

Family Family::poisson(Interval theta) { return Family(FamilyKind::Poisson, 1.0, theta); }

void Family::check_domain(double theta) const {
    if (!theta_.contains(theta)) {
        std::ostringstream os;
        os << "natural parameter " << theta << " outside " << to_string(kind_)
           << " interval " << theta_.describe();
        throw DomainError(os.str());
    }
}

namespace detail {

double cumulant(FamilyKind kind, double theta) {
    switch (kind) {
        case FamilyKind::Gaussian: return 0.5 * theta * theta;
        case FamilyKind::Bernoulli:
            // log(1 + e^t) without overflow
            return theta > 0.0 ? theta + std::log1p(std::exp(-theta)) : std::log1p(std::exp(theta));
        case FamilyKind::Poisson: return std::exp(theta);
    }
    return 0.0;
}

double mean(FamilyKind kind, double theta) {
    switch (kind) {
        case FamilyKind::Gaussian: return theta;
        case FamilyKind::Bernoulli: return logistic(theta);
        case FamilyKind::Poisson: return std::exp(theta);
    }
    return 0.0;
}

double variance_rate(FamilyKind kind, double theta) {
    switch (kind) {
        case FamilyKind::Gaussian: return 1.0;
        case FamilyKind::Bernoulli: return bernoulli_curvature(theta);
        case FamilyKind::Poisson: return std::exp(theta);
    }
    return 0.0;
}

}  // namespace detail

double cumulant(const Family& family, double theta) {
    family.check_domain(theta);
    return detail::cumulant(family.kind(), theta);
}

double mean(const Family& family, double theta) {
    family.check_domain(theta);
    return detail::mean(family.kind(), theta);
}

double variance_rate(const Family& family, double theta) {
    family.check_domain(theta);
    return detail::variance_rate(family.kind(), theta);
}

double sample_response(const Family& family, double theta, Rng& rng) {
    family.check_domain(theta);
    switch (family.kind()) {
        case FamilyKind::Gaussian:
            return theta + std::sqrt(family.scale()) * standard_normal(rng);
        case FamilyKind::Bernoulli:
            if (family.scale() != 1.0) throw ConfigError("bernoulli family fixes a = 1");
            return uniform01(rng) < logistic(theta) ? 1.0 : 0.0;
        case FamilyKind::Poisson: {
            if (family.scale() != 1.0) throw ConfigError("poisson family fixes a = 1");
            std::poisson_distribution<long> d(std::exp(theta));
            return static_cast<double>(d(rng));
        }
    }
    return 0.0;
}

}  // namespace ewa
