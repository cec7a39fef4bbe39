#include "ewa/gibbs.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ewa/error.hpp"

namespace ewa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

GibbsConfig GibbsConfig::with_defaults(std::shared_ptr<const Dataset> data, std::optional<double> lambda,
                                       std::optional<double> zeta, std::optional<double> B1) {
    if (!data) throw ConfigError("GibbsConfig needs a dataset");
    GibbsConfig cfg;
    cfg.lambda = lambda.value_or(static_cast<double>(data->n()));
    cfg.prior.p = data->p();
    cfg.prior.zeta = zeta ? *zeta : default_zeta(data->X());
    cfg.prior.B1 = B1.value_or(100.0);
    cfg.data = std::move(data);
    cfg.validate();
    return cfg;
}

void GibbsConfig::validate() const {
    if (!data) throw ConfigError("GibbsConfig needs a dataset");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be nonnegative and finite");
    prior.validate();
    if (prior.p != data->p()) {
        std::ostringstream os;
        os << "prior dimension " << prior.p << " differs from design width " << data->p();
        throw DimensionError(os.str());
    }
}

double log_posterior_unnormalized(const Vector& beta, const GibbsConfig& cfg) {
    const double lp = log_prior_unnormalized(beta, cfg.prior);
    if (lp == kNegInf) return kNegInf;
    if (!in_domain(cfg.data->family(), cfg.data->X() * beta)) return kNegInf;
    if (cfg.lambda == 0.0) return lp;
    return cfg.lambda * avg_loglik(*cfg.data, beta) + lp;
}

Vector log_posterior_gradient(const Vector& beta, const GibbsConfig& cfg) {
    Vector g = log_prior_gradient(beta, cfg.prior);
    if (cfg.lambda != 0.0) g += cfg.lambda * loglik_gradient(*cfg.data, beta);
    return g;
}

GibbsPosterior::GibbsPosterior(GibbsConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const Family& fam = cfg_.data->family();
    inv_na_ = 1.0 / (static_cast<double>(cfg_.data->n()) * fam.scale());
    const Interval& iv = fam.theta_interval();
    quadratic_ = fam.kind() == FamilyKind::Gaussian && std::isinf(iv.lo) && std::isinf(iv.hi);
    if (quadratic_) {
        gram_ = cfg_.data->X().transpose() * cfg_.data->X();
        xty_ = cfg_.data->X().transpose() * cfg_.data->Y();
    }
}

double GibbsPosterior::log_density(const Vector& beta) const {
    double lp = 0.0;
    evaluate(beta, lp, nullptr);
    return lp;
}

double GibbsPosterior::log_likelihood_term(const Vector& beta) const {
    if (quadratic_) return (beta.dot(xty_) - 0.5 * beta.dot(gram_ * beta)) * inv_na_;
    return avg_loglik(*cfg_.data, beta);
}

bool GibbsPosterior::evaluate(const Vector& beta, double& log_density, Vector* grad) const {
    const PriorConfig& pr = cfg_.prior;
    if (beta.size() != pr.p) throw DimensionError("posterior evaluated at a vector of the wrong length");
    const double norm = beta.norm();
    if (!(norm < pr.B1)) {
        log_density = kNegInf;
        return false;
    }
    const double z2 = pr.zeta * pr.zeta;
    double lp = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) lp += std::log(z2 + beta[j] * beta[j]);
    lp *= -2.0;

    const double lambda = cfg_.lambda;
    if (quadratic_) {
        if (lambda != 0.0) {
            const Vector gb = gram_ * beta;
            lp += lambda * (beta.dot(xty_) - 0.5 * beta.dot(gb)) * inv_na_;
            if (grad) *grad = (lambda * inv_na_) * (xty_ - gb);
        } else if (grad) {
            grad->setZero(beta.size());
        }
    } else {
        const Dataset& d = *cfg_.data;
        const Vector theta = d.X() * beta;
        if (!in_domain(d.family(), theta)) {
            log_density = kNegInf;
            return false;
        }
        if (lambda != 0.0) {
            const FamilyKind kind = d.family().kind();
            double ll = 0.0;
            Vector resid(theta.size());
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                ll += d.Y()[i] * theta[i] - detail::cumulant(kind, theta[i]);
                resid[i] = d.Y()[i] - detail::mean(kind, theta[i]);
            }
            lp += lambda * ll * inv_na_;
            if (grad) *grad = (lambda * inv_na_) * (d.X().transpose() * resid);
        } else if (grad) {
            grad->setZero(beta.size());
        }
    }
    if (grad) {
        for (Eigen::Index j = 0; j < beta.size(); ++j) (*grad)[j] -= 4.0 * beta[j] / (z2 + beta[j] * beta[j]);
    }
    log_density = lp;
    return std::isfinite(lp);
}

namespace {

// Maximizes lambda * loglik(beta) - 0.5 * beta^T diag(penalty) beta by damped
// Newton from `beta`. Returns the number of Newton steps taken.
int penalized_newton(const GibbsPosterior& post, const Vector& penalty, Vector& beta, int max_steps = 100) {
    const GibbsConfig& cfg = post.config();
    const Dataset& d = *cfg.data;
    const Family& fam = d.family();
    const double scale = cfg.lambda / (static_cast<double>(d.n()) * fam.scale());
    auto objective = [&](const Vector& b) {
        const Vector theta = d.X() * b;
        if (!in_domain(fam, theta)) return kNegInf;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            ll += d.Y()[i] * theta[i] - detail::cumulant(fam.kind(), theta[i]);
        return scale * ll - 0.5 * b.dot(penalty.cwiseProduct(b));
    };

    double f = objective(beta);
    int steps = 0;
    for (; steps < max_steps; ++steps) {
        const Vector theta = d.X() * beta;
        Vector resid(theta.size()), w(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            resid[i] = d.Y()[i] - detail::mean(fam.kind(), theta[i]);
            w[i] = detail::variance_rate(fam.kind(), theta[i]);
        }
        const Vector grad = scale * (d.X().transpose() * resid) - penalty.cwiseProduct(beta);
        Matrix neg_hess = scale * (d.X().transpose() * w.asDiagonal() * d.X());
        neg_hess.diagonal() += penalty;
        const Vector step = neg_hess.ldlt().solve(grad);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            const Vector cand = beta + t * step;
            const double fc = objective(cand);
            if (fc >= f) {
                const bool tiny = std::abs(fc - f) <= 1e-14 * (1.0 + std::abs(f));
                beta = cand;
                f = fc;
                improved = !tiny;
                break;
            }
        }
        if (!improved) break;
        if (t * step.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
            ++steps;
            break;
        }
    }
    return steps;
}

}  // namespace

ModeResult find_posterior_mode(const GibbsPosterior& posterior, int max_iterations, double tol) {
    const GibbsConfig& cfg = posterior.config();
    const Eigen::Index p = cfg.prior.p;
    ModeResult res;
    res.beta = Vector::Zero(p);
    if (cfg.lambda == 0.0) {
        res.log_density = posterior.log_density(res.beta);
        res.converged = true;
        return res;
    }

    // light ridge keeps the start well defined when p >= n
    const Dataset& d = *cfg.data;
    const double ridge = 1e-6 * cfg.lambda / (static_cast<double>(d.n()) * d.family().scale()) *
                         std::max(1.0, d.X().colwise().squaredNorm().maxCoeff());
    Vector beta = Vector::Zero(p);
    penalized_newton(posterior, Vector::Constant(p, ridge), beta);
    if (beta.norm() >= cfg.prior.B1) beta *= 0.5 * cfg.prior.B1 / beta.norm();

    const double z2 = cfg.prior.zeta * cfg.prior.zeta;
    double f = posterior.log_density(beta);
    for (int it = 1; it <= max_iterations; ++it) {
        Vector penalty(p);
        for (Eigen::Index j = 0; j < p; ++j) penalty[j] = 4.0 / (z2 + beta[j] * beta[j]);
        Vector next = beta;
        penalized_newton(posterior, penalty, next);
        const double fn = posterior.log_density(next);
        res.iterations = it;
        if (!(fn >= f)) {
            // no ascent left at rounding level counts as a stationary point
            res.converged = f - fn <= 1e-12 * (1.0 + std::abs(f));
            break;
        }
        const double change = (next - beta).lpNorm<Eigen::Infinity>();
        beta = next;
        f = fn;
        if (change <= tol * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
            res.converged = true;
            break;
        }
    }
    res.beta = beta;
    res.log_density = f;
    return res;
}

}  // namespace ewa
