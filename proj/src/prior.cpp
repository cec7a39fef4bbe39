#include "ewa/prior.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ewa/error.hpp"
#include "ewa/glm.hpp"

namespace ewa {

namespace {

void check_dim(const Vector& beta, const PriorConfig& cfg) {
    if (beta.size() != cfg.p) {
        std::ostringstream os;
        os << "prior: coefficient vector has length " << beta.size() << ", expected p = " << cfg.p;
        throw DimensionError(os.str());
    }
}

// t_3 by the ratio Z / sqrt(V / 3), V ~ chi^2_3
double student_t3(Rng& rng) {
    const double z = standard_normal(rng);
    double v = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double g = standard_normal(rng);
        v += g * g;
    }
    return z / std::sqrt(v / 3.0);
}

}  // namespace

void PriorConfig::validate() const {
    if (!(zeta > 0.0) || !std::isfinite(zeta)) throw ConfigError("prior zeta must be positive and finite");
    if (!(B1 > 0.0)) throw ConfigError("prior radius B1 must be positive");
    if (p < 1) throw ConfigError("prior dimension p must be at least 1");
}

std::string PriorConfig::feasibility_warning() const {
    const double margin = B1 - 2.0 * static_cast<double>(p) * zeta;
    if (margin > 0.0) return {};
    std::ostringstream os;
    os << "B1 - 2 p zeta = " << margin << " is not positive; no coefficient vector satisfies the radius condition";
    return os.str();
}

double default_zeta(const Matrix& X) {
    const double norm = spectral_norm(X);
    if (!(norm > 0.0)) throw ConfigError("default zeta needs a design with positive spectral norm");
    return 1.0 / (static_cast<double>(X.rows()) * static_cast<double>(X.cols()) * norm);
}

double log_prior_unnormalized(const Vector& beta, const PriorConfig& cfg) {
    check_dim(beta, cfg);
    if (!(beta.norm() <= cfg.B1)) return -std::numeric_limits<double>::infinity();
    const double z2 = cfg.zeta * cfg.zeta;
    double s = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) s += std::log(z2 + beta[j] * beta[j]);
    return -2.0 * s;
}

Vector log_prior_gradient(const Vector& beta, const PriorConfig& cfg) {
    check_dim(beta, cfg);
    if (!(beta.norm() < cfg.B1)) {
        std::ostringstream os;
        os << "prior gradient requested at ||beta|| = " << beta.norm() << ", not inside radius " << cfg.B1;
        throw DomainError(os.str());
    }
    const double z2 = cfg.zeta * cfg.zeta;
    Vector g(beta.size());
    for (Eigen::Index j = 0; j < beta.size(); ++j) g[j] = -4.0 * beta[j] / (z2 + beta[j] * beta[j]);
    return g;
}

Vector sample_prior(const PriorConfig& cfg, Rng& rng, long max_attempts) {
    cfg.validate();
    const double s = prior_t3_scale(cfg.zeta);
    Vector beta(cfg.p);
    for (long attempt = 0; attempt < max_attempts; ++attempt) {
        for (Eigen::Index j = 0; j < cfg.p; ++j) beta[j] = s * student_t3(rng);
        if (beta.norm() <= cfg.B1) return beta;
    }
    std::ostringstream os;
    os << "sample_prior: no draw inside radius B1 = " << cfg.B1 << " after " << max_attempts
       << " attempts (zeta = " << cfg.zeta << ")";
    throw SamplingError(os.str());
}

}  // namespace ewa
